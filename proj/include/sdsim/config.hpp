#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdsim/analysis.hpp"
#include "sdsim/hierarchy.hpp"
#include "sdsim/netcore.hpp"
#include "sdsim/protocol.hpp"

namespace sdsim {

// One named experimental condition. When fixed_deletion_seed is unset, the
// deletion order is derived per run from the run's master seed, so all
// schedules within one run share it (matched-pair deletions).
struct NamedSchedule {
  std::string name;
  int per_step = 1;
  long relearn_epochs = 0;
  FrequencySpec frequency;
  std::optional<double> relearn_rate;
  std::optional<std::uint64_t> fixed_deletion_seed;

  AtrophySchedule materialize(std::uint64_t deletion_seed) const;
};

std::vector<std::uint64_t> default_seeds();      // 1..20
std::vector<NamedSchedule> default_schedules();  // base n=0, relearn n=200

struct ExperimentConfig {
  TreeSpec tree;
  NetworkConfig network;
  double train_epsilon = 1e-8;
  long train_max_epochs = 100000;
  std::vector<std::uint64_t> seeds = default_seeds();
  std::vector<double> checkpoints = {0.5};  // atrophy fractions
  std::string output_dir = "out";
  NaiveModel naive = NaiveModel::Zero;
  ClassifyThresholds thresholds;
  std::vector<NamedSchedule> schedules = default_schedules();

  TrainOptions train_options() const {
    return {train_epsilon, train_max_epochs, network.learning_rate, 0};
  }
};

bool operator==(const NamedSchedule& a, const NamedSchedule& b);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// Flat sectioned key=value text with '#' comments. Unknown keys, bad values
// and missing requirements fail with line-anchored ConfigError messages.
// parse_config(render_config(cfg)) == cfg, bit-exactly.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string render_config(const ExperimentConfig& cfg);
void validate_config(const ExperimentConfig& cfg);

// Per-run seed derivation from a master seed (documented in the README).
std::uint64_t network_seed_for_run(const ExperimentConfig& cfg,
                                   std::uint64_t master_seed);
std::uint64_t deletion_seed_for_run(std::uint64_t master_seed);

// Stable run identity: hash of the canonical config text, the schedule name
// and the effective master seed.
std::string run_id(const ExperimentConfig& cfg, const std::string& schedule,
                   std::uint64_t master_seed);

}  // namespace sdsim
