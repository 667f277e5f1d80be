#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdsim/types.hpp"

namespace sdsim {

// Balanced tree of semantic distinctions. Level 1 is the root, level `depth`
// holds the items (leaves). Every node contributes one output feature, so two
// items share exactly as many active features as the level of their deepest
// common ancestor.

struct TreeSpec {
  int branching = 2;
  int depth = 4;
  std::uint64_t seed = 0;  // reserved for label shuffling; never affects structure
};

struct TreeNode {
  int id;      // breadth-first index, root = 0
  int level;   // 1 = root, depth = leaves
  int parent;  // node id, -1 for the root
};

class HierarchyTree {
 public:
  HierarchyTree() = default;

  int branching() const { return branching_; }
  int depth() const { return depth_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int feature_count() const { return node_count(); }
  int item_count() const { return static_cast<int>(items_.size()); }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  // Leaf node ids in canonical left-to-right order; index = item id.
  const std::vector<int>& items() const { return items_; }

  int item_node(int item) const;
  // Features are indexed by breadth-first node id (a bijection).
  int feature_of_node(int node_id) const;
  int level_of_feature(int feature) const;
  bool is_ancestor_or_self(int node_id, int item) const;

 private:
  friend HierarchyTree build_hierarchy(const TreeSpec& spec);
  int branching_ = 0;
  int depth_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<int> items_;
};

// Deterministic for a given spec. Rejects branching < 2 or depth < 2.
HierarchyTree build_hierarchy(const TreeSpec& spec);

// One training environment: one-hot item inputs X (identity), binary feature
// targets Y, per-item presentation weights freq.
struct Dataset {
  Matrix X;                            // P x P
  Matrix Y;                            // F x P
  Vector freq;                         // P, strictly positive
  std::vector<int> level_of_feature;   // F entries in 1..depth
  int branching = 0;
  int depth = 0;

  int items() const { return static_cast<int>(X.cols()); }
  int features() const { return static_cast<int>(Y.rows()); }
};

// Builds the canonical dataset for a tree; freq starts at all ones.
Dataset make_dataset(const HierarchyTree& tree);

enum class FrequencyRule { Uniform, OddItemsDouble, Explicit };

struct FrequencySpec {
  FrequencyRule rule = FrequencyRule::Uniform;
  Vector weights;  // Explicit only

  static FrequencySpec uniform() { return {}; }
  static FrequencySpec odd_items_double() {
    return {FrequencyRule::OddItemsDouble, {}};
  }
  static FrequencySpec explicit_weights(Vector w) {
    return {FrequencyRule::Explicit, std::move(w)};
  }
};

std::string to_string(FrequencyRule rule);

// Copy of ds with freq replaced according to the rule. odd_items_double
// doubles the items with odd 1-based index in canonical leaf order, i.e. the
// first item of every sibling pair. Explicit weights must be positive and
// match the item count.
Dataset apply_frequency(const Dataset& ds, const FrequencySpec& spec);

// Level of the deepest common ancestor of two items; depth when a == b.
int hierarchy_distance(const HierarchyTree& tree, int item_a, int item_b);

// Same quantity from canonical leaf indices alone (valid because datasets are
// always canonically ordered balanced trees).
int lca_level(const Dataset& ds, int item_a, int item_b);

// Plain-text bundle: header "P F D branching", Y rows as 0/1, freq line,
// level_of_feature line. Round-trips exactly.
void save_dataset(const Dataset& ds, std::ostream& os);
void save_dataset_file(const Dataset& ds, const std::string& path);
Dataset load_dataset(std::istream& is);
Dataset load_dataset_file(const std::string& path);

}  // namespace sdsim
