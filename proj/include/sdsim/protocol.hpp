#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdsim/analysis.hpp"
#include "sdsim/hierarchy.hpp"
#include "sdsim/netcore.hpp"

namespace sdsim {

// One atrophy protocol: delete per_step neurons at a time, in the order of a
// seed-determined permutation of hidden indices, relearning for
// relearn_epochs after each deletion until no neuron remains.
struct AtrophySchedule {
  std::uint64_t deletion_seed = 0;
  int per_step = 1;
  long relearn_epochs = 0;              // n; 0 is the no-relearning baseline
  FrequencySpec relearn_frequency;      // weighting of the relearning phases
  std::optional<double> relearn_rate;   // defaults to the training rate
};

struct StepRecord {
  int step = 0;   // 1-based
  int alive = 0;  // alive count after this step's deletion
  std::vector<int> deleted_ids;
  // Training loss under the relearning environment, right after the deletion
  // and after the relearning budget. Equal when relearn_epochs = 0.
  double loss_pre = 0.0;
  double loss_post = 0.0;
  Matrix yhat;  // F x P snapshot after relearning
  // Evaluation under the caller's dataset (its freq, not the relearn rule's).
  std::vector<LevelError> level_errors;
  std::vector<ClassifiedResponse> responses;  // one per item
};

struct TrajectoryRecord {
  int hidden_start = 0;  // alive count before the first deletion
  std::vector<StepRecord> steps;
};

struct ScheduleOptions {
  ClassifyThresholds thresholds;
  NaiveModel naive = NaiveModel::Zero;
};

// Runs the schedule on a copy of the (already trained) network. Deterministic
// given the dataset, state, and schedule seeds.
TrajectoryRecord run_schedule(const Dataset& ds, NetworkState net,
                              const AtrophySchedule& sched,
                              double base_learning_rate,
                              const ScheduleOptions& opts = {});

// Trains one network to convergence, clones the converged state, and runs
// both schedules on the clones. The schedules must share deletion_seed and
// per_step so deletion order is matched pairwise.
std::pair<TrajectoryRecord, TrajectoryRecord> run_paired_conditions(
    const Dataset& ds, const NetworkConfig& cfg, const TrainOptions& train_opts,
    const AtrophySchedule& sched_a, const AtrophySchedule& sched_b,
    const ScheduleOptions& opts = {});

// CSV exports. Items and levels are numbered from 1 in all output files;
// superordinate responses leave decoded_item empty.
void write_trajectory_csv(const TrajectoryRecord& traj, std::ostream& os);
void write_responses_csv(const TrajectoryRecord& traj, std::ostream& os);

// Exact state bundle (hex-float snapshots) used by `analyze` to recompute
// analyses without rerunning training. Level errors and responses are
// recomputed on load by the caller, not stored.
void save_trajectory(const TrajectoryRecord& traj, std::ostream& os);
TrajectoryRecord load_trajectory(std::istream& is);

}  // namespace sdsim
