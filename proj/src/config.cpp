#include "sdsim/config.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "sdsim/errors.hpp"
#include "sdsim/rng.hpp"
#include "sdsim/textio.hpp"

namespace sdsim {

AtrophySchedule NamedSchedule::materialize(std::uint64_t deletion_seed) const {
  AtrophySchedule sched;
  sched.deletion_seed = fixed_deletion_seed.value_or(deletion_seed);
  sched.per_step = per_step;
  sched.relearn_epochs = relearn_epochs;
  sched.relearn_frequency = frequency;
  sched.relearn_rate = relearn_rate;
  return sched;
}

bool operator==(const NamedSchedule& a, const NamedSchedule& b) {
  const auto freq_eq = [](const FrequencySpec& x, const FrequencySpec& y) {
    if (x.rule != y.rule) return false;
    if (x.rule != FrequencyRule::Explicit) return true;
    return x.weights.size() == y.weights.size() && x.weights == y.weights;
  };
  return a.name == b.name && a.per_step == b.per_step &&
         a.relearn_epochs == b.relearn_epochs &&
         freq_eq(a.frequency, b.frequency) &&
         a.relearn_rate == b.relearn_rate &&
         a.fixed_deletion_seed == b.fixed_deletion_seed;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.tree.branching == b.tree.branching && a.tree.depth == b.tree.depth &&
         a.tree.seed == b.tree.seed && a.network.hidden == b.network.hidden &&
         a.network.init_scale == b.network.init_scale &&
         a.network.init_density == b.network.init_density &&
         a.network.learning_rate == b.network.learning_rate &&
         a.network.activation == b.network.activation &&
         a.network.seed == b.network.seed &&
         a.train_epsilon == b.train_epsilon &&
         a.train_max_epochs == b.train_max_epochs && a.seeds == b.seeds &&
         a.checkpoints == b.checkpoints && a.output_dir == b.output_dir &&
         a.naive == b.naive &&
         a.thresholds.tau_super == b.thresholds.tau_super &&
         a.thresholds.tau_correct == b.thresholds.tau_correct &&
         a.schedules == b.schedules;
}

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

struct Section {
  std::string name;    // "tree", "network", ... or "schedule"
  std::string suffix;  // schedule name
  int line = 0;
  std::map<std::string, Entry> entries;
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<Section> tokenize(const std::string& text) {
  std::vector<Section> sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      const std::string inner = trim(line.substr(1, line.size() - 2));
      Section sec;
      sec.line = line_no;
      const auto space = inner.find_first_of(" \t");
      if (space == std::string::npos) {
        sec.name = inner;
      } else {
        sec.name = inner.substr(0, space);
        sec.suffix = trim(inner.substr(space + 1));
      }
      if (sec.name.empty()) fail(line_no, "empty section name");
      sections.push_back(std::move(sec));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
    if (sections.empty()) fail(line_no, "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    auto& entries = sections.back().entries;
    if (entries.count(key)) fail(line_no, "duplicate key '" + key + "'");
    entries[key] = {value, line_no, false};
  }
  return sections;
}

class SectionReader {
 public:
  explicit SectionReader(Section* sec) : sec_(sec) {}

  bool present() const { return sec_ != nullptr; }

  std::optional<std::string> raw(const std::string& key) {
    if (!sec_) return std::nullopt;
    const auto it = sec_->entries.find(key);
    if (it == sec_->entries.end()) return std::nullopt;
    it->second.used = true;
    last_line_ = it->second.line;
    return it->second.value;
  }

  int last_line() const { return last_line_; }

  template <typename F>
  void get(const std::string& key, F&& convert) {
    const auto v = raw(key);
    if (!v) return;
    try {
      convert(*v);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(last_line_, "bad value for '" + key + "': " + e.what());
    }
  }

  void finish(const std::string& context) const {
    if (!sec_) return;
    for (const auto& [key, entry] : sec_->entries)
      if (!entry.used)
        fail(entry.line, "unknown key '" + key + "' in [" + context + "]");
  }

 private:
  Section* sec_;
  int last_line_ = 0;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& value) {
  std::vector<std::uint64_t> seeds;
  for (const auto& tok : split_ws(value)) {
    const auto dots = tok.find("..");
    if (dots != std::string::npos) {
      const std::uint64_t lo = parse_u64(tok.substr(0, dots));
      const std::uint64_t hi = parse_u64(tok.substr(dots + 2));
      if (hi < lo) throw RuntimeFault("descending seed range " + tok);
      if (hi - lo > 100000) throw RuntimeFault("seed range too large: " + tok);
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_u64(tok));
    }
  }
  return seeds;
}

FrequencySpec parse_frequency(const std::string& value) {
  const auto toks = split_ws(value);
  if (toks.empty()) throw RuntimeFault("empty frequency rule");
  if (toks[0] == "uniform" && toks.size() == 1) return FrequencySpec::uniform();
  if (toks[0] == "odd_items_double" && toks.size() == 1)
    return FrequencySpec::odd_items_double();
  if (toks[0] == "explicit") {
    if (toks.size() < 2) throw RuntimeFault("explicit frequency needs weights");
    Vector w(static_cast<Eigen::Index>(toks.size() - 1));
    for (std::size_t i = 1; i < toks.size(); ++i)
      w(static_cast<Eigen::Index>(i - 1)) = parse_double(toks[i]);
    return FrequencySpec::explicit_weights(std::move(w));
  }
  throw RuntimeFault("unknown frequency rule '" + toks[0] +
                     "' (expected uniform, odd_items_double or explicit)");
}

std::string render_frequency(const FrequencySpec& spec) {
  if (spec.rule != FrequencyRule::Explicit) return to_string(spec.rule);
  std::string out = "explicit";
  for (Eigen::Index i = 0; i < spec.weights.size(); ++i)
    out += " " + format_g17(spec.weights(i));
  return out;
}

}  // namespace

std::vector<std::uint64_t> default_seeds() {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
  return seeds;
}

std::vector<NamedSchedule> default_schedules() {
  NamedSchedule base;
  base.name = "base";
  base.relearn_epochs = 0;
  NamedSchedule relearn;
  relearn.name = "relearn";
  relearn.relearn_epochs = 200;
  // A relearning budget of 200 epochs represents partial re-exposure: broad
  // distinctions recover within it, fine ones do not. At the training rate
  // the budget would recover everything, so the default pins the slower
  // measured rate explicitly.
  relearn.relearn_rate = 5e-4;
  return {std::move(base), std::move(relearn)};
}

ExperimentConfig parse_config(const std::string& text) {
  auto sections = tokenize(text);

  ExperimentConfig cfg;
  Section* tree = nullptr;
  Section* network = nullptr;
  Section* train = nullptr;
  Section* experiment = nullptr;
  std::vector<Section*> schedule_sections;

  for (auto& sec : sections) {
    if (sec.name == "tree") {
      if (tree) fail(sec.line, "duplicate [tree] section");
      tree = &sec;
    } else if (sec.name == "network") {
      if (network) fail(sec.line, "duplicate [network] section");
      network = &sec;
    } else if (sec.name == "train") {
      if (train) fail(sec.line, "duplicate [train] section");
      train = &sec;
    } else if (sec.name == "experiment") {
      if (experiment) fail(sec.line, "duplicate [experiment] section");
      experiment = &sec;
    } else if (sec.name == "schedule") {
      if (sec.suffix.empty()) fail(sec.line, "schedule section needs a name");
      schedule_sections.push_back(&sec);
    } else {
      fail(sec.line, "unknown section [" + sec.name + "]");
    }
  }

  SectionReader tr(tree);
  tr.get("branching", [&](const std::string& v) {
    cfg.tree.branching = static_cast<int>(parse_long(v));
  });
  tr.get("depth", [&](const std::string& v) {
    cfg.tree.depth = static_cast<int>(parse_long(v));
  });
  tr.get("seed", [&](const std::string& v) { cfg.tree.seed = parse_u64(v); });
  tr.finish("tree");

  SectionReader nw(network);
  nw.get("hidden", [&](const std::string& v) {
    cfg.network.hidden = static_cast<int>(parse_long(v));
  });
  nw.get("init_scale", [&](const std::string& v) {
    cfg.network.init_scale = parse_double(v);
  });
  nw.get("init_density", [&](const std::string& v) {
    cfg.network.init_density = parse_double(v);
  });
  nw.get("learning_rate", [&](const std::string& v) {
    cfg.network.learning_rate = parse_double(v);
  });
  nw.get("activation", [&](const std::string& v) {
    cfg.network.activation = activation_from_string(v);
  });
  nw.get("seed", [&](const std::string& v) { cfg.network.seed = parse_u64(v); });
  nw.finish("network");

  SectionReader tn(train);
  tn.get("epsilon", [&](const std::string& v) {
    cfg.train_epsilon = parse_double(v);
  });
  tn.get("max_epochs", [&](const std::string& v) {
    cfg.train_max_epochs = parse_long(v);
  });
  tn.finish("train");

  SectionReader ex(experiment);
  ex.get("seeds", [&](const std::string& v) { cfg.seeds = parse_seed_list(v); });
  ex.get("checkpoints", [&](const std::string& v) {
    cfg.checkpoints.clear();
    for (const auto& tok : split_ws(v)) cfg.checkpoints.push_back(parse_double(tok));
  });
  ex.get("output_dir", [&](const std::string& v) {
    if (v.empty()) throw RuntimeFault("output_dir must not be empty");
    cfg.output_dir = v;
  });
  ex.get("naive", [&](const std::string& v) {
    if (v == "zero") cfg.naive = NaiveModel::Zero;
    else if (v == "mean") cfg.naive = NaiveModel::Mean;
    else throw RuntimeFault("naive must be zero or mean");
  });
  ex.get("tau_super", [&](const std::string& v) {
    cfg.thresholds.tau_super = parse_double(v);
  });
  ex.get("tau_correct", [&](const std::string& v) {
    cfg.thresholds.tau_correct = parse_double(v);
  });
  ex.finish("experiment");

  if (!schedule_sections.empty()) {
    cfg.schedules.clear();
    for (Section* sec : schedule_sections) {
      NamedSchedule sched;
      sched.name = sec->suffix;
      SectionReader sr(sec);
      sr.get("per_step", [&](const std::string& v) {
        sched.per_step = static_cast<int>(parse_long(v));
      });
      sr.get("relearn_epochs", [&](const std::string& v) {
        sched.relearn_epochs = parse_long(v);
      });
      sr.get("frequency", [&](const std::string& v) {
        sched.frequency = parse_frequency(v);
      });
      sr.get("relearn_rate", [&](const std::string& v) {
        sched.relearn_rate = parse_double(v);
      });
      sr.get("deletion_seed", [&](const std::string& v) {
        sched.fixed_deletion_seed = parse_u64(v);
      });
      sr.finish("schedule " + sched.name);
      cfg.schedules.push_back(std::move(sched));
    }
  }

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config(read_file(path));
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[tree]\n";
  os << "branching = " << cfg.tree.branching << '\n';
  os << "depth = " << cfg.tree.depth << '\n';
  os << "seed = " << cfg.tree.seed << '\n';
  os << '\n';
  os << "[network]\n";
  os << "hidden = " << cfg.network.hidden << '\n';
  os << "init_scale = " << format_g17(cfg.network.init_scale) << '\n';
  os << "init_density = " << format_g17(cfg.network.init_density) << '\n';
  os << "learning_rate = " << format_g17(cfg.network.learning_rate) << '\n';
  os << "activation = " << to_string(cfg.network.activation) << '\n';
  os << "seed = " << cfg.network.seed << '\n';
  os << '\n';
  os << "[train]\n";
  os << "epsilon = " << format_g17(cfg.train_epsilon) << '\n';
  os << "max_epochs = " << cfg.train_max_epochs << '\n';
  os << '\n';
  os << "[experiment]\n";
  os << "seeds =";
  for (const auto s : cfg.seeds) os << ' ' << s;
  os << '\n';
  os << "checkpoints =";
  for (const auto c : cfg.checkpoints) os << ' ' << format_g17(c);
  os << '\n';
  os << "output_dir = " << cfg.output_dir << '\n';
  os << "naive = " << to_string(cfg.naive) << '\n';
  os << "tau_super = " << format_g17(cfg.thresholds.tau_super) << '\n';
  os << "tau_correct = " << format_g17(cfg.thresholds.tau_correct) << '\n';
  for (const auto& sched : cfg.schedules) {
    os << '\n';
    os << "[schedule " << sched.name << "]\n";
    os << "per_step = " << sched.per_step << '\n';
    os << "relearn_epochs = " << sched.relearn_epochs << '\n';
    os << "frequency = " << render_frequency(sched.frequency) << '\n';
    if (sched.relearn_rate)
      os << "relearn_rate = " << format_g17(*sched.relearn_rate) << '\n';
    if (sched.fixed_deletion_seed)
      os << "deletion_seed = " << *sched.fixed_deletion_seed << '\n';
  }
  return os.str();
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.tree.branching < 2) throw ConfigError("tree branching must be at least 2");
  if (cfg.tree.depth < 2) throw ConfigError("tree depth must be at least 2");

  const HierarchyTree tree = build_hierarchy(cfg.tree);
  if (cfg.network.hidden < 1) throw ConfigError("network hidden must be at least 1");
  if (cfg.network.hidden < tree.item_count())
    throw ConfigError(
        "network hidden must be at least the item count (" +
        std::to_string(tree.item_count()) + ") so the intact network can fit exactly");
  if (!(cfg.network.init_scale > 0.0))
    throw ConfigError("network init_scale must be positive");
  if (!(cfg.network.init_density > 0.0) || cfg.network.init_density > 1.0)
    throw ConfigError("network init_density must be in (0, 1]");
  if (!(cfg.network.learning_rate > 0.0))
    throw ConfigError("network learning_rate must be positive");
  if (!(cfg.train_epsilon > 0.0)) throw ConfigError("train epsilon must be positive");
  if (cfg.train_max_epochs < 1) throw ConfigError("train max_epochs must be at least 1");

  if (cfg.seeds.empty()) throw ConfigError("at least one seed required");
  std::set<std::uint64_t> unique(cfg.seeds.begin(), cfg.seeds.end());
  if (unique.size() != cfg.seeds.size())
    throw ConfigError("seeds must be distinct");

  if (cfg.checkpoints.empty()) throw ConfigError("at least one checkpoint required");
  for (const double c : cfg.checkpoints)
    if (!(c > 0.0) || c > 1.0)
      throw ConfigError("checkpoints must be atrophy fractions in (0, 1]");

  if (!(cfg.thresholds.tau_super > 0.0) ||
      !(cfg.thresholds.tau_super < cfg.thresholds.tau_correct))
    throw ConfigError("thresholds must satisfy 0 < tau_super < tau_correct");

  if (cfg.schedules.empty()) throw ConfigError("at least one schedule required");
  std::set<std::string> names;
  for (const auto& sched : cfg.schedules) {
    if (sched.name.empty()) throw ConfigError("schedule name must not be empty");
    if (!names.insert(sched.name).second)
      throw ConfigError("duplicate schedule name '" + sched.name + "'");
    if (sched.per_step < 1)
      throw ConfigError("schedule per_step must be at least 1");
    if (sched.relearn_epochs < 0)
      throw ConfigError("schedule relearn_epochs must be nonnegative");
    if (sched.relearn_rate && !(*sched.relearn_rate > 0.0))
      throw ConfigError("schedule relearn_rate must be positive");
    if (sched.frequency.rule == FrequencyRule::Explicit) {
      if (sched.frequency.weights.size() != tree.item_count())
        throw ConfigError("schedule '" + sched.name +
                          "': explicit weights must have one entry per item");
      if ((sched.frequency.weights.array() <= 0.0).any())
        throw ConfigError("schedule '" + sched.name +
                          "': frequency weights must be strictly positive");
    }
  }
}

std::uint64_t network_seed_for_run(const ExperimentConfig& cfg,
                                   std::uint64_t master_seed) {
  return derive_seed(master_seed, 0) ^ cfg.network.seed;
}

std::uint64_t deletion_seed_for_run(std::uint64_t master_seed) {
  return derive_seed(master_seed, 1);
}

std::string run_id(const ExperimentConfig& cfg, const std::string& schedule,
                   std::uint64_t master_seed) {
  // Identity describes the computation, not the destination: the same config
  // written to a different output_dir yields the same run ids.
  ExperimentConfig identity = cfg;
  identity.output_dir = "out";
  const std::string key = render_config(identity) + "\n" + schedule + "\n" +
                          std::to_string(master_seed);
  return to_hex16(fnv1a64(key));
}

}  // namespace sdsim
