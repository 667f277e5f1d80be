#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sdsim/analysis.hpp"
#include "sdsim/errors.hpp"
#include "sdsim/protocol.hpp"

using namespace sdsim;

namespace {

Dataset default_dataset() { return make_dataset(build_hierarchy({2, 4, 0})); }

NetworkState trained_network(const Dataset& ds, int hidden, std::uint64_t seed,
                             Activation act = Activation::Linear) {
  NetworkConfig cfg;
  cfg.hidden = hidden;
  cfg.seed = seed;
  cfg.activation = act;
  NetworkState net = init_network(cfg, ds.items(), ds.features());
  train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq, {});
  return net;
}

double total_percent(const StepRecord& rec) {
  double sse = 0.0, naive = 0.0;
  for (const auto& e : rec.level_errors) {
    sse += e.sse;
    naive += e.naive_sse;
  }
  return 100.0 * sse / naive;
}

}  // namespace

TEST_CASE("deleting everything at once is a single terminal step") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 1);

  AtrophySchedule sched;
  sched.per_step = 16;
  const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);

  REQUIRE(traj.steps.size() == 1);
  const auto& only = traj.steps.front();
  CHECK(only.alive == 0);
  CHECK(only.deleted_ids.size() == 16);
  CHECK(only.yhat == Matrix::Zero(ds.features(), ds.items()));
  for (const auto& e : only.level_errors) CHECK(e.percent == 100.0);
}

TEST_CASE("alive counts decrease strictly to zero and end at the zero map") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 2);

  for (const int per_step : {1, 3, 5}) {
    AtrophySchedule sched;
    sched.per_step = per_step;
    sched.deletion_seed = 40;
    sched.relearn_epochs = 50;
    const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);

    CHECK(traj.steps.size() ==
          static_cast<std::size_t>((16 + per_step - 1) / per_step));
    int prev = traj.hidden_start;
    for (const auto& rec : traj.steps) {
      CHECK(rec.alive < prev);
      prev = rec.alive;
    }
    CHECK(traj.steps.back().alive == 0);
    CHECK(traj.steps.back().yhat.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("deletion order depends only on the deletion seed") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 3);

  AtrophySchedule base;
  base.deletion_seed = 123;
  AtrophySchedule relearn = base;
  relearn.relearn_epochs = 200;

  const TrajectoryRecord a = run_schedule(ds, net, base, 0.05);
  const TrajectoryRecord b = run_schedule(ds, net, relearn, 0.05);

  REQUIRE(a.steps.size() == b.steps.size());
  bool outputs_differ = false;
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    CHECK(a.steps[s].deleted_ids == b.steps[s].deleted_ids);
    if (a.steps[s].yhat != b.steps[s].yhat) outputs_differ = true;
  }
  CHECK(outputs_differ);

  AtrophySchedule other = base;
  other.deletion_seed = 124;
  const TrajectoryRecord c = run_schedule(ds, net, other, 0.05);
  bool order_differs = false;
  for (std::size_t s = 0; s < a.steps.size(); ++s)
    if (a.steps[s].deleted_ids != c.steps[s].deleted_ids) order_differs = true;
  CHECK(order_differs);
}

TEST_CASE("runs are bit-identical for identical inputs") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 4);

  AtrophySchedule sched;
  sched.deletion_seed = 9;
  sched.relearn_epochs = 100;
  const TrajectoryRecord a = run_schedule(ds, net, sched, 0.05);
  const TrajectoryRecord b = run_schedule(ds, net, sched, 0.05);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    CHECK(a.steps[s].yhat == b.steps[s].yhat);
    CHECK(a.steps[s].loss_post == b.steps[s].loss_post);
  }
}

TEST_CASE("degradation is monotone without relearning") {
  const Dataset ds = default_dataset();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NetworkState net = trained_network(ds, 16, seed);
    AtrophySchedule sched;
    sched.deletion_seed = seed * 11;
    const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);
    double prev = -1.0;
    for (const auto& rec : traj.steps) {
      const double cur = total_percent(rec);
      CHECK(cur >= prev - 1e-9);
      prev = cur;
    }
    CHECK(prev == 100.0);
  }
}

TEST_CASE("relearning lowers the training loss at every step") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 8, 21);

  AtrophySchedule sched;
  sched.deletion_seed = 77;
  sched.relearn_epochs = 2000;
  const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);

  const int max_rank = static_cast<int>(std::min(ds.Y.rows(), ds.Y.cols()));
  for (const auto& rec : traj.steps) {
    CHECK(rec.loss_post <= rec.loss_pre + 1e-12);
    // Near-optimal relearning: within 1% of the best rank-r loss.
    const Matrix oracle = truncated_svd_oracle(ds, std::min(rec.alive, max_rank));
    const double best = 0.5 * weighted_sse(oracle, ds);
    CHECK(rec.loss_post <= 1.01 * best + 1e-9);
    CHECK(rec.loss_post >= best - 1e-9);
  }
}

TEST_CASE("fully relearned maps approach the truncated-SVD oracle") {
  // Generic explicit frequencies make every singular value simple, so the
  // best rank-r map is unique and the matrix-level comparison is well posed.
  Dataset ds = default_dataset();
  Vector freq(8);
  for (int p = 0; p < 8; ++p) freq(p) = 1.0 + 0.13 * (p + 1);
  ds = apply_frequency(ds, FrequencySpec::explicit_weights(freq));

  const ModeSpectrum spec = mode_spectrum(ds);
  for (Eigen::Index m = 1; m < spec.singular_values.size(); ++m)
    CHECK(spec.singular_values(m - 1) - spec.singular_values(m) > 1e-3);

  NetworkConfig cfg;
  cfg.hidden = 8;
  cfg.seed = 5;
  NetworkState net = init_network(cfg, ds.items(), ds.features());
  train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq, {});

  AtrophySchedule sched;
  sched.deletion_seed = 31;
  sched.relearn_epochs = 4000;
  sched.relearn_frequency = FrequencySpec::explicit_weights(freq);
  const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);

  for (const auto& rec : traj.steps) {
    if (rec.alive == 0) continue;
    const Matrix oracle = truncated_svd_oracle(ds, rec.alive);
    const double gap =
        (rec.yhat - oracle).norm() / std::max(oracle.norm(), 1e-12);
    CHECK(gap <= 1e-2);
  }
}

TEST_CASE("paired conditions share deletions and train once") {
  const Dataset ds = default_dataset();
  NetworkConfig cfg;
  cfg.seed = 8;

  AtrophySchedule base;
  base.deletion_seed = 55;
  AtrophySchedule relearn = base;
  relearn.relearn_epochs = 200;

  const auto [a, b] = run_paired_conditions(ds, cfg, {}, base, relearn);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t s = 0; s < a.steps.size(); ++s)
    CHECK(a.steps[s].deleted_ids == b.steps[s].deleted_ids);

  // Identical schedules produce identical trajectories.
  const auto [c, d] = run_paired_conditions(ds, cfg, {}, base, base);
  for (std::size_t s = 0; s < c.steps.size(); ++s) {
    CHECK(c.steps[s].yhat == d.steps[s].yhat);
    CHECK(c.steps[s].yhat == a.steps[s].yhat);
  }

  AtrophySchedule mismatched = relearn;
  mismatched.deletion_seed = 56;
  CHECK_THROWS_AS(run_paired_conditions(ds, cfg, {}, base, mismatched),
                  ConfigError);
  AtrophySchedule coarser = relearn;
  coarser.per_step = 2;
  CHECK_THROWS_AS(run_paired_conditions(ds, cfg, {}, base, coarser),
                  ConfigError);
}

TEST_CASE("pre-dead neurons are skipped by the deletion order") {
  const Dataset ds = default_dataset();
  NetworkState net = trained_network(ds, 16, 12);
  delete_neurons_inplace(net, {0, 1, 2, 3});

  AtrophySchedule sched;
  sched.per_step = 3;
  const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);
  CHECK(traj.hidden_start == 12);
  CHECK(traj.steps.size() == 4);  // ceil(12 / 3)
  for (const auto& rec : traj.steps)
    for (const int id : rec.deleted_ids) CHECK(id > 3);
}

TEST_CASE("schedule validation") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 13);

  AtrophySchedule bad;
  bad.per_step = 0;
  CHECK_THROWS_AS(run_schedule(ds, net, bad, 0.05), ConfigError);
  bad.per_step = 1;
  bad.relearn_epochs = -1;
  CHECK_THROWS_AS(run_schedule(ds, net, bad, 0.05), ConfigError);
  bad.relearn_epochs = 0;
  bad.relearn_rate = 0.0;
  CHECK_THROWS_AS(run_schedule(ds, net, bad, 0.05), ConfigError);
}

TEST_CASE("relearn rate override changes the trajectory") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 14);

  AtrophySchedule fast;
  fast.deletion_seed = 3;
  fast.relearn_epochs = 50;
  AtrophySchedule slow = fast;
  slow.relearn_rate = 1e-4;

  const TrajectoryRecord a = run_schedule(ds, net, fast, 0.05);
  const TrajectoryRecord b = run_schedule(ds, net, slow, 0.05);
  CHECK(a.steps.front().yhat != b.steps.front().yhat);
  CHECK(a.steps.front().deleted_ids == b.steps.front().deleted_ids);
}

TEST_CASE("trajectory bundle round-trips exactly") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 15);

  AtrophySchedule sched;
  sched.deletion_seed = 4;
  sched.relearn_epochs = 25;
  const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);

  std::ostringstream os;
  save_trajectory(traj, os);
  std::istringstream in(os.str());
  const TrajectoryRecord back = load_trajectory(in);

  REQUIRE(back.steps.size() == traj.steps.size());
  CHECK(back.hidden_start == traj.hidden_start);
  for (std::size_t s = 0; s < traj.steps.size(); ++s) {
    CHECK(back.steps[s].yhat == traj.steps[s].yhat);
    CHECK(back.steps[s].deleted_ids == traj.steps[s].deleted_ids);
    CHECK(back.steps[s].loss_pre == traj.steps[s].loss_pre);
    CHECK(back.steps[s].loss_post == traj.steps[s].loss_post);
    CHECK(back.steps[s].alive == traj.steps[s].alive);
  }
}

TEST_CASE("csv exports carry the documented columns") {
  const Dataset ds = default_dataset();
  const NetworkState net = trained_network(ds, 16, 16);

  AtrophySchedule sched;
  sched.per_step = 16;
  const TrajectoryRecord traj = run_schedule(ds, net, sched, 0.05);

  std::ostringstream tcsv;
  write_trajectory_csv(traj, tcsv);
  std::istringstream tlines(tcsv.str());
  std::string line;
  std::getline(tlines, line);
  CHECK(line == "step,alive,level,normalized_error,loss_pre,loss_post");
  int rows = 0;
  while (std::getline(tlines, line)) ++rows;
  CHECK(rows == 4);  // one step x four levels

  std::ostringstream rcsv;
  write_responses_csv(traj, rcsv);
  std::istringstream rlines(rcsv.str());
  std::getline(rlines, line);
  CHECK(line == "step,item,decoded_item,taxonomy");
  rows = 0;
  while (std::getline(rlines, line)) ++rows;
  CHECK(rows == 8);  // one step x eight items
}
