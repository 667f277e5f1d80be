#include "sdsim/protocol.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "sdsim/errors.hpp"
#include "sdsim/rng.hpp"
#include "sdsim/textio.hpp"

namespace sdsim {

namespace {

void validate_schedule(const AtrophySchedule& sched) {
  if (sched.per_step < 1)
    throw ConfigError("schedule per_step must be at least 1");
  if (sched.relearn_epochs < 0)
    throw ConfigError("schedule relearn_epochs must be nonnegative");
  if (sched.relearn_rate && !(*sched.relearn_rate > 0.0))
    throw ConfigError("schedule relearn_rate must be positive");
}

}  // namespace

TrajectoryRecord run_schedule(const Dataset& ds, NetworkState net,
                              const AtrophySchedule& sched,
                              double base_learning_rate,
                              const ScheduleOptions& opts) {
  validate_schedule(sched);
  if (!(base_learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be positive");

  const Dataset env = apply_frequency(ds, sched.relearn_frequency);
  const double rate = sched.relearn_rate.value_or(base_learning_rate);

  // Deletion order: permutation of all hidden indices, restricted to the
  // neurons alive at entry.
  std::vector<int> order;
  for (const int h : random_permutation(net.hidden(), sched.deletion_seed))
    if (net.alive[static_cast<std::size_t>(h)]) order.push_back(h);

  TrajectoryRecord traj;
  traj.hidden_start = net.alive_count();

  std::size_t next = 0;
  int step = 0;
  while (next < order.size()) {
    StepRecord rec;
    rec.step = ++step;
    const std::size_t take = std::min<std::size_t>(
        static_cast<std::size_t>(sched.per_step), order.size() - next);
    rec.deleted_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(next),
                           order.begin() + static_cast<std::ptrdiff_t>(next + take));
    next += take;

    delete_neurons_inplace(net, rec.deleted_ids);
    rec.alive = net.alive_count();
    rec.loss_pre = loss(net, env);

    if (sched.relearn_epochs > 0 && rec.alive > 0)
      train_epochs_inplace(net, env.X, env.Y, env.freq, sched.relearn_epochs,
                           rate);
    rec.loss_post = sched.relearn_epochs > 0 && rec.alive > 0
                        ? loss(net, env)
                        : rec.loss_pre;

    rec.yhat = forward(net, ds.X);
    rec.level_errors = per_level_error(rec.yhat, ds, opts.naive);
    rec.responses.reserve(static_cast<std::size_t>(ds.items()));
    for (int p = 0; p < ds.items(); ++p)
      rec.responses.push_back(
          classify_response(rec.yhat.col(p), p, ds, opts.thresholds));

    traj.steps.push_back(std::move(rec));
  }
  return traj;
}

std::pair<TrajectoryRecord, TrajectoryRecord> run_paired_conditions(
    const Dataset& ds, const NetworkConfig& cfg, const TrainOptions& train_opts,
    const AtrophySchedule& sched_a, const AtrophySchedule& sched_b,
    const ScheduleOptions& opts) {
  if (sched_a.deletion_seed != sched_b.deletion_seed)
    throw ConfigError("paired schedules must share deletion_seed");
  if (sched_a.per_step != sched_b.per_step)
    throw ConfigError("paired schedules must share per_step");

  NetworkState net = init_network(cfg, ds.items(), ds.features());
  train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq, train_opts);

  TrajectoryRecord a = run_schedule(ds, net, sched_a, cfg.learning_rate, opts);
  TrajectoryRecord b =
      run_schedule(ds, std::move(net), sched_b, cfg.learning_rate, opts);
  return {std::move(a), std::move(b)};
}

void write_trajectory_csv(const TrajectoryRecord& traj, std::ostream& os) {
  os << "step,alive,level,normalized_error,loss_pre,loss_post\n";
  for (const auto& rec : traj.steps) {
    for (const auto& le : rec.level_errors) {
      os << rec.step << ',' << rec.alive << ',' << le.level << ','
         << format_g17(le.percent) << ',' << format_g17(rec.loss_pre) << ','
         << format_g17(rec.loss_post) << '\n';
    }
  }
}

void write_responses_csv(const TrajectoryRecord& traj, std::ostream& os) {
  os << "step,item,decoded_item,taxonomy\n";
  for (const auto& rec : traj.steps) {
    for (std::size_t p = 0; p < rec.responses.size(); ++p) {
      const auto& r = rec.responses[p];
      os << rec.step << ',' << p + 1 << ',';
      if (r.decoded_item) os << *r.decoded_item + 1;
      os << ',' << to_string(r.cls) << '\n';
    }
  }
}

void save_trajectory(const TrajectoryRecord& traj, std::ostream& os) {
  os << traj.hidden_start << ' ' << traj.steps.size() << '\n';
  for (const auto& rec : traj.steps) {
    os << rec.step << ' ' << rec.alive << ' ' << format_hex(rec.loss_pre)
       << ' ' << format_hex(rec.loss_post) << ' ' << rec.deleted_ids.size();
    for (const int id : rec.deleted_ids) os << ' ' << id;
    os << '\n';
    os << rec.yhat.rows() << ' ' << rec.yhat.cols() << '\n';
    for (Eigen::Index r = 0; r < rec.yhat.rows(); ++r) {
      for (Eigen::Index c = 0; c < rec.yhat.cols(); ++c) {
        if (c) os << ' ';
        os << format_hex(rec.yhat(r, c));
      }
      os << '\n';
    }
  }
}

TrajectoryRecord load_trajectory(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw RuntimeFault("trajectory bundle: missing header");
  auto toks = split_ws(line);
  if (toks.size() != 2) throw RuntimeFault("trajectory bundle: bad header");

  TrajectoryRecord traj;
  traj.hidden_start = static_cast<int>(parse_long(toks[0]));
  const long steps = parse_long(toks[1]);

  for (long s = 0; s < steps; ++s) {
    if (!std::getline(is, line))
      throw RuntimeFault("trajectory bundle: truncated step header");
    toks = split_ws(line);
    if (toks.size() < 5) throw RuntimeFault("trajectory bundle: bad step header");

    StepRecord rec;
    rec.step = static_cast<int>(parse_long(toks[0]));
    rec.alive = static_cast<int>(parse_long(toks[1]));
    rec.loss_pre = parse_double(toks[2]);
    rec.loss_post = parse_double(toks[3]);
    const long deleted = parse_long(toks[4]);
    if (static_cast<long>(toks.size()) != 5 + deleted)
      throw RuntimeFault("trajectory bundle: bad deleted id list");
    for (long i = 0; i < deleted; ++i)
      rec.deleted_ids.push_back(
          static_cast<int>(parse_long(toks[static_cast<std::size_t>(5 + i)])));

    if (!std::getline(is, line))
      throw RuntimeFault("trajectory bundle: missing snapshot shape");
    const auto shape = split_ws(line);
    if (shape.size() != 2) throw RuntimeFault("trajectory bundle: bad snapshot shape");
    const long rows = parse_long(shape[0]);
    const long cols = parse_long(shape[1]);
    rec.yhat.resize(rows, cols);
    for (long r = 0; r < rows; ++r) {
      if (!std::getline(is, line))
        throw RuntimeFault("trajectory bundle: truncated snapshot");
      const auto row = split_ws(line);
      if (static_cast<long>(row.size()) != cols)
        throw RuntimeFault("trajectory bundle: bad snapshot row width");
      for (long c = 0; c < cols; ++c)
        rec.yhat(r, c) = parse_double(row[static_cast<std::size_t>(c)]);
    }
    traj.steps.push_back(std::move(rec));
  }
  return traj;
}

}  // namespace sdsim
