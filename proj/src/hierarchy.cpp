#include "sdsim/hierarchy.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sdsim/errors.hpp"
#include "sdsim/textio.hpp"

namespace sdsim {

namespace {

// First node id of a level: S_k = (b^(k-1) - 1) / (b - 1).
long level_offset(long b, int level) {
  long off = 0, width = 1;
  for (int k = 1; k < level; ++k) {
    off += width;
    width *= b;
  }
  return off;
}

}  // namespace

int HierarchyTree::item_node(int item) const {
  if (item < 0 || item >= item_count())
    throw std::invalid_argument("unknown item id " + std::to_string(item));
  return items_[static_cast<std::size_t>(item)];
}

int HierarchyTree::feature_of_node(int node_id) const {
  if (node_id < 0 || node_id >= node_count())
    throw std::invalid_argument("unknown node id " + std::to_string(node_id));
  return node_id;
}

int HierarchyTree::level_of_feature(int feature) const {
  if (feature < 0 || feature >= feature_count())
    throw std::invalid_argument("unknown feature " + std::to_string(feature));
  return nodes_[static_cast<std::size_t>(feature)].level;
}

bool HierarchyTree::is_ancestor_or_self(int node_id, int item) const {
  int cur = item_node(item);
  while (cur != -1) {
    if (cur == node_id) return true;
    cur = nodes_[static_cast<std::size_t>(cur)].parent;
  }
  return false;
}

HierarchyTree build_hierarchy(const TreeSpec& spec) {
  if (spec.branching < 2)
    throw ConfigError("tree branching must be at least 2");
  if (spec.depth < 2) throw ConfigError("tree depth must be at least 2");

  // Guard absurd sizes before materializing anything.
  double total = 0, width = 1;
  for (int k = 1; k <= spec.depth; ++k) {
    total += width;
    width *= spec.branching;
  }
  if (total > 1e6)
    throw ConfigError("tree too large: " + std::to_string(spec.branching) +
                      "^k features exceed 1e6");

  HierarchyTree tree;
  tree.branching_ = spec.branching;
  tree.depth_ = spec.depth;

  const long b = spec.branching;
  for (int level = 1; level <= spec.depth; ++level) {
    const long offset = level_offset(b, level);
    const long parent_offset = level_offset(b, level - 1);
    long count = 1;
    for (int k = 1; k < level; ++k) count *= b;
    for (long i = 0; i < count; ++i) {
      TreeNode node;
      node.id = static_cast<int>(offset + i);
      node.level = level;
      node.parent =
          level == 1 ? -1 : static_cast<int>(parent_offset + i / b);
      tree.nodes_.push_back(node);
      if (level == spec.depth) tree.items_.push_back(node.id);
    }
  }
  return tree;
}

Dataset make_dataset(const HierarchyTree& tree) {
  const int p = tree.item_count();
  const int f = tree.feature_count();

  Dataset ds;
  ds.branching = tree.branching();
  ds.depth = tree.depth();
  ds.X = Matrix::Identity(p, p);
  ds.Y = Matrix::Zero(f, p);
  ds.freq = Vector::Ones(p);
  ds.level_of_feature.resize(static_cast<std::size_t>(f));

  for (int feature = 0; feature < f; ++feature)
    ds.level_of_feature[static_cast<std::size_t>(feature)] =
        tree.level_of_feature(feature);

  const auto& nodes = tree.nodes();
  for (int item = 0; item < p; ++item) {
    int cur = tree.item_node(item);
    while (cur != -1) {
      ds.Y(tree.feature_of_node(cur), item) = 1.0;
      cur = nodes[static_cast<std::size_t>(cur)].parent;
    }
  }
  return ds;
}

std::string to_string(FrequencyRule rule) {
  switch (rule) {
    case FrequencyRule::Uniform: return "uniform";
    case FrequencyRule::OddItemsDouble: return "odd_items_double";
    case FrequencyRule::Explicit: return "explicit";
  }
  return "?";
}

Dataset apply_frequency(const Dataset& ds, const FrequencySpec& spec) {
  Dataset out = ds;
  switch (spec.rule) {
    case FrequencyRule::Uniform:
      out.freq = Vector::Ones(ds.items());
      break;
    case FrequencyRule::OddItemsDouble:
      out.freq = Vector::Ones(ds.items());
      for (int p = 0; p < ds.items(); p += 2) out.freq(p) = 2.0;
      break;
    case FrequencyRule::Explicit:
      if (spec.weights.size() != ds.items())
        throw ConfigError("explicit frequency weights must have one entry per item");
      if ((spec.weights.array() <= 0.0).any())
        throw ConfigError("frequency weights must be strictly positive");
      out.freq = spec.weights;
      break;
  }
  return out;
}

int hierarchy_distance(const HierarchyTree& tree, int item_a, int item_b) {
  int a = tree.item_node(item_a);
  int b = tree.item_node(item_b);
  const auto& nodes = tree.nodes();
  int level = tree.depth();
  while (a != b) {
    a = nodes[static_cast<std::size_t>(a)].parent;
    b = nodes[static_cast<std::size_t>(b)].parent;
    --level;
  }
  return level;
}

int lca_level(const Dataset& ds, int item_a, int item_b) {
  if (item_a < 0 || item_a >= ds.items() || item_b < 0 ||
      item_b >= ds.items())
    throw std::invalid_argument("unknown item id");
  int level = ds.depth;
  while (item_a != item_b) {
    item_a /= ds.branching;
    item_b /= ds.branching;
    --level;
  }
  return level;
}

void save_dataset(const Dataset& ds, std::ostream& os) {
  os << ds.items() << ' ' << ds.features() << ' ' << ds.depth << ' '
     << ds.branching << '\n';
  for (int f = 0; f < ds.features(); ++f) {
    for (int p = 0; p < ds.items(); ++p) {
      if (p) os << ' ';
      os << static_cast<int>(ds.Y(f, p));
    }
    os << '\n';
  }
  for (int p = 0; p < ds.items(); ++p) {
    if (p) os << ' ';
    os << format_g17(ds.freq(p));
  }
  os << '\n';
  for (int f = 0; f < ds.features(); ++f) {
    if (f) os << ' ';
    os << ds.level_of_feature[static_cast<std::size_t>(f)];
  }
  os << '\n';
}

void save_dataset_file(const Dataset& ds, const std::string& path) {
  std::ostringstream ss;
  save_dataset(ds, ss);
  write_file_atomic(path, ss.str());
}

Dataset load_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw RuntimeFault("dataset bundle: missing header");
  const auto header = split_ws(line);
  if (header.size() != 4)
    throw RuntimeFault("dataset bundle: header must be 'P F D branching'");
  const int p = static_cast<int>(parse_long(header[0]));
  const int f = static_cast<int>(parse_long(header[1]));
  const int depth = static_cast<int>(parse_long(header[2]));
  const int branching = static_cast<int>(parse_long(header[3]));

  // The bundle must describe a canonical balanced hierarchy; rebuild it and
  // verify the stored matrices against it so Dataset invariants always hold.
  const HierarchyTree tree = build_hierarchy({branching, depth, 0});
  if (tree.item_count() != p || tree.feature_count() != f)
    throw RuntimeFault("dataset bundle: header inconsistent with tree shape");
  Dataset ds = make_dataset(tree);

  for (int row = 0; row < f; ++row) {
    if (!std::getline(is, line))
      throw RuntimeFault("dataset bundle: truncated feature matrix");
    const auto toks = split_ws(line);
    if (static_cast<int>(toks.size()) != p)
      throw RuntimeFault("dataset bundle: bad feature row width");
    for (int col = 0; col < p; ++col) {
      const long v = parse_long(toks[static_cast<std::size_t>(col)]);
      if (v != 0 && v != 1)
        throw RuntimeFault("dataset bundle: features must be 0/1");
      if (static_cast<double>(v) != ds.Y(row, col))
        throw RuntimeFault("dataset bundle: feature matrix does not match the canonical hierarchy");
    }
  }

  if (!std::getline(is, line))
    throw RuntimeFault("dataset bundle: missing frequency line");
  const auto ftoks = split_ws(line);
  if (static_cast<int>(ftoks.size()) != p)
    throw RuntimeFault("dataset bundle: bad frequency line width");
  for (int col = 0; col < p; ++col) {
    ds.freq(col) = parse_double(ftoks[static_cast<std::size_t>(col)]);
    if (!(ds.freq(col) > 0.0))
      throw RuntimeFault("dataset bundle: frequencies must be positive");
  }

  if (!std::getline(is, line))
    throw RuntimeFault("dataset bundle: missing level line");
  const auto ltoks = split_ws(line);
  if (static_cast<int>(ltoks.size()) != f)
    throw RuntimeFault("dataset bundle: bad level line width");
  for (int row = 0; row < f; ++row) {
    const long v = parse_long(ltoks[static_cast<std::size_t>(row)]);
    if (v != ds.level_of_feature[static_cast<std::size_t>(row)])
      throw RuntimeFault("dataset bundle: level map does not match the canonical hierarchy");
  }
  return ds;
}

Dataset load_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFault("cannot open dataset bundle: " + path);
  return load_dataset(in);
}

}  // namespace sdsim
