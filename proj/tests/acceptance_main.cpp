// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Everything runs on the library defaults.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "sdsim/config.hpp"
#include "sdsim/runner.hpp"
#include "sdsim/textio.hpp"
#include "sdsim/trajectory_stats.hpp"

using namespace sdsim;
namespace fs = std::filesystem;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Percent at the first step where the deleted fraction reaches `fraction`.
double percent_at_checkpoint(const TrajectoryRecord& traj, int level,
                             double fraction) {
  const int hidden = traj.hidden_start;
  const int target =
      static_cast<int>(std::ceil(fraction * static_cast<double>(hidden) - 1e-9));
  for (const auto& rec : traj.steps) {
    if (hidden - rec.alive >= target)
      return rec.level_errors[static_cast<std::size_t>(level - 1)].percent;
  }
  return traj.steps.back().level_errors[static_cast<std::size_t>(level - 1)].percent;
}

struct SeedRuns {
  TrajectoryRecord base;
  TrajectoryRecord relearn;
  TrajectoryRecord relearn_freq;  // linear block only
};

// Runs base/relearn(/relearn-freq) conditions for each seed, sharing one
// trained network per seed, parallelized over seeds.
std::vector<SeedRuns> run_block(const ExperimentConfig& cfg, const Dataset& ds,
                                Activation act, bool with_freq_condition) {
  const std::size_t n = cfg.seeds.size();
  std::vector<SeedRuns> out(n);
  std::atomic<std::size_t> next{0};

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const std::uint64_t master = cfg.seeds[i];

      NetworkConfig net_cfg = cfg.network;
      net_cfg.activation = act;
      net_cfg.seed = network_seed_for_run(cfg, master);
      NetworkState net = init_network(net_cfg, ds.items(), ds.features());
      train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq,
                                   cfg.train_options());

      // The default config's own schedules: base (n = 0) and relearn
      // (n = 200), plus the frequency-doubled variant of the latter.
      const std::uint64_t del_seed = deletion_seed_for_run(master);
      AtrophySchedule base = cfg.schedules[0].materialize(del_seed);
      AtrophySchedule relearn = cfg.schedules[1].materialize(del_seed);
      AtrophySchedule freq = relearn;
      freq.relearn_frequency = FrequencySpec::odd_items_double();

      out[i].base = run_schedule(ds, net, base, net_cfg.learning_rate);
      out[i].relearn = run_schedule(ds, net, relearn, net_cfg.learning_rate);
      if (with_freq_condition)
        out[i].relearn_freq = run_schedule(ds, net, freq, net_cfg.learning_rate);
    }
  };

  const unsigned pool_size = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < pool_size; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

std::vector<double> gather_percent(const std::vector<SeedRuns>& runs, int level,
                                   TrajectoryRecord SeedRuns::*member) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(percent_at_checkpoint(r.*member, level, 0.5));
  return v;
}

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig cfg;  // library defaults: (2,4) tree, H = 16, 20 seeds
  validate_config(cfg);
  const Dataset ds = make_dataset(build_hierarchy(cfg.tree));

  const std::vector<SeedRuns> linear = run_block(cfg, ds, Activation::Linear, true);
  const double linear_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // ---- Criterion 1: relearning rescues general knowledge, quickly.
  const double base_l1 = median(gather_percent(linear, 1, &SeedRuns::base));
  const double relearn_l1 = median(gather_percent(linear, 1, &SeedRuns::relearn));
  report(1,
         relearn_l1 <= 5.0 && base_l1 >= 30.0 && linear_seconds <= 120.0,
         "linear level-1 at 50% atrophy: n=200 -> " + fmt(relearn_l1) +
             "% (<=5), n=0 -> " + fmt(base_l1) + "% (>=30), block took " +
             fmt(linear_seconds) + "s (<=120)");

  const std::vector<SeedRuns> relu = run_block(cfg, ds, Activation::Relu, false);

  // ---- Criterion 2: fine-grained loss persists in all four conditions.
  const double base_l4 = median(gather_percent(linear, 4, &SeedRuns::base));
  const double relearn_l4 = median(gather_percent(linear, 4, &SeedRuns::relearn));
  const double relu_base_l1 = median(gather_percent(relu, 1, &SeedRuns::base));
  const double relu_base_l4 = median(gather_percent(relu, 4, &SeedRuns::base));
  const double relu_relearn_l1 = median(gather_percent(relu, 1, &SeedRuns::relearn));
  const double relu_relearn_l4 = median(gather_percent(relu, 4, &SeedRuns::relearn));
  report(2,
         base_l4 > base_l1 && relearn_l4 > relearn_l1 &&
             relu_base_l4 > relu_base_l1 && relu_relearn_l4 > relu_relearn_l1 &&
             relearn_l4 >= 30.0 && relu_relearn_l4 >= 30.0,
         "level-4 > level-1 in all four conditions (" + fmt(base_l4) + ">" +
             fmt(base_l1) + ", " + fmt(relearn_l4) + ">" + fmt(relearn_l1) +
             ", " + fmt(relu_base_l4) + ">" + fmt(relu_base_l1) + ", " +
             fmt(relu_relearn_l4) + ">" + fmt(relu_relearn_l1) +
             "); n=200 level-4 >= 30");

  // ---- Criterion 3: the relu replication of criterion 1.
  report(3, relu_relearn_l1 <= 10.0 && relu_base_l1 >= 30.0,
         "relu level-1 at 50% atrophy: n=200 -> " + fmt(relu_relearn_l1) +
             "% (<=10), n=0 -> " + fmt(relu_base_l1) + "% (>=30)");

  // ---- Criterion 4: category-coordinate errors come first under relearning.
  {
    const double never = 1e9;
    std::vector<double> cc, xc, super;
    for (const auto& r : linear) {
      const auto c1 = first_onset(r.relearn, ResponseClass::CategoryCoordinate);
      const auto c2 = first_onset(r.relearn, ResponseClass::CrossCategory);
      const auto c3 = first_onset(r.relearn, ResponseClass::Superordinate);
      cc.push_back(c1 ? *c1 : never);
      xc.push_back(c2 ? *c2 : never);
      super.push_back(c3 ? *c3 : never);
    }
    const double m_cc = median(cc), m_xc = median(xc), m_super = median(super);
    report(4, m_cc < m_xc && m_xc <= m_super,
           "median onsets: category-coordinate " + fmt(m_cc) +
               " < cross-category " + fmt(m_xc) + " <= superordinate " +
               fmt(m_super));
  }

  // ---- Criterion 5: prototyping under frequency-weighted relearning.
  {
    const Dataset env = apply_frequency(ds, FrequencySpec::odd_items_double());
    std::vector<double> rates, controls;
    int empty = 0;
    for (const auto& r : linear) {
      const auto rate = prototyping_rate(r.relearn_freq, env).rate();
      if (rate)
        rates.push_back(*rate);
      else
        ++empty;
      const auto control = forced_decode_rate(r.relearn, ds, env.freq).rate();
      if (control) controls.push_back(*control);
    }
    const bool have_data = !rates.empty() && !controls.empty();
    const double m_rate = have_data ? median(rates) : 0.0;
    const double m_control = have_data ? median(controls) : 0.0;
    report(5,
           have_data && m_rate > 0.5 && std::abs(m_control - 0.5) <= 0.15,
           "prototyping rate " + fmt(m_rate) + " (> 0.5, " +
               std::to_string(empty) + " empty seeds); uniform forced-decode "
               "control " + fmt(m_control) + " (within 0.5 +- 0.15)");
  }

  // ---- Criterion 6: SVD-oracle equivalence for heavily relearned nets.
  {
    // Generic explicit frequencies keep every singular value simple so the
    // best rank-r map is unique; relearning and evaluation share them.
    Vector freq(ds.items());
    for (int p = 0; p < ds.items(); ++p) freq(p) = 1.0 + 0.13 * (p + 1);
    const Dataset env = apply_frequency(ds, FrequencySpec::explicit_weights(freq));

    const int max_rank = static_cast<int>(std::min(env.Y.rows(), env.Y.cols()));
    std::vector<Matrix> oracles_by_rank;
    for (int r = 0; r <= max_rank; ++r)
      oracles_by_rank.push_back(truncated_svd_oracle(env, r));

    double worst_gap = 0.0;
    bool dominance = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      NetworkConfig net_cfg = cfg.network;
      net_cfg.seed = network_seed_for_run(cfg, seed);
      NetworkState net = init_network(net_cfg, env.items(), env.features());
      train_to_convergence_inplace(net, env.X, env.Y, env.freq,
                                   cfg.train_options());
      AtrophySchedule sched;
      sched.deletion_seed = deletion_seed_for_run(seed);
      sched.relearn_epochs = 5000;
      sched.relearn_frequency = FrequencySpec::explicit_weights(freq);
      const TrajectoryRecord traj =
          run_schedule(env, net, sched, net_cfg.learning_rate);
      for (const auto& rec : traj.steps) {
        const Matrix& oracle = oracles_by_rank[static_cast<std::size_t>(
            std::min(rec.alive, max_rank))];
        const double gap =
            (rec.yhat - oracle).norm() / std::max(oracle.norm(), 1e-12);
        worst_gap = std::max(worst_gap, gap);
        if (weighted_sse(oracle, env) > weighted_sse(rec.yhat, env) + 1e-9)
          dominance = false;
      }
    }

    // Eckart-Young dominance also holds at every recorded step of every
    // uniform-frequency run above.
    std::vector<Matrix> uniform_oracles;
    for (int r = 0; r <= max_rank; ++r)
      uniform_oracles.push_back(truncated_svd_oracle(ds, r));
    const auto check_dominance = [&](const TrajectoryRecord& traj) {
      for (const auto& rec : traj.steps) {
        const Matrix& oracle = uniform_oracles[static_cast<std::size_t>(
            std::min(rec.alive, max_rank))];
        if (weighted_sse(oracle, ds) > weighted_sse(rec.yhat, ds) + 1e-9)
          dominance = false;
      }
    };
    for (const auto& r : linear) {
      check_dominance(r.base);
      check_dominance(r.relearn);
      check_dominance(r.relearn_freq);
    }
    for (const auto& r : relu) {
      check_dominance(r.base);
      check_dominance(r.relearn);
    }

    report(6, worst_gap <= 1e-2 && dominance,
           "n=5000 oracle gap " + fmt(worst_gap) +
               " (<= 0.01) across 5 seeds; Eckart-Young dominance " +
               (dominance ? "holds" : "violated") + " at every recorded step");
  }

  // ---- Criterion 7: gradient correctness against finite differences.
  {
    std::mt19937_64 gen(4242);
    double worst = 0.0;
    int done = 0;
    while (done < 100) {
      const int items = 2 + static_cast<int>(gen() % 3);
      const int features = 2 + static_cast<int>(gen() % 6);
      const int hidden = 1 + static_cast<int>(gen() % 5);
      const bool use_relu = (done % 2) == 1;

      NetworkState net;
      net.activation = use_relu ? Activation::Relu : Activation::Linear;
      net.w1.resize(hidden, items);
      net.w2.resize(features, hidden);
      net.alive.assign(static_cast<std::size_t>(hidden), 1);
      for (Eigen::Index r = 0; r < net.w1.rows(); ++r)
        for (Eigen::Index c = 0; c < net.w1.cols(); ++c)
          net.w1(r, c) = uniform_real(gen, -0.5, 0.5);
      for (Eigen::Index r = 0; r < net.w2.rows(); ++r)
        for (Eigen::Index c = 0; c < net.w2.cols(); ++c)
          net.w2(r, c) = uniform_real(gen, -0.5, 0.5);

      const Matrix x = Matrix::Identity(items, items);
      Matrix y(features, items);
      Vector freq(items);
      for (Eigen::Index r = 0; r < y.rows(); ++r)
        for (Eigen::Index c = 0; c < y.cols(); ++c)
          y(r, c) = uniform_real(gen, -1.0, 1.0);
      for (Eigen::Index p = 0; p < freq.size(); ++p)
        freq(p) = uniform_real(gen, 0.5, 2.0);
      if (use_relu && (net.w1 * x).cwiseAbs().minCoeff() <= 1e-3) continue;

      const auto [fd1, fd2] = oracles::fd_gradients(net, x, y, freq);
      NetworkState stepped = net;
      gd_step_inplace(stepped, x, y, freq, 1.0);
      const double err1 =
          (net.w1 - stepped.w1 - fd1).norm() / std::max(fd1.norm(), 1e-12);
      const double err2 =
          (net.w2 - stepped.w2 - fd2).norm() / std::max(fd2.norm(), 1e-12);
      worst = std::max({worst, err1, err2});
      ++done;
    }
    report(7, worst <= 1e-5,
           "100 random instances, worst relative gradient error " + fmt(worst));
  }

  // ---- Criterion 8: trivial anchors.
  {
    bool terminal_ok = true;
    for (const auto& r : linear)
      for (const auto& e : r.base.steps.back().level_errors)
        if (e.percent != 100.0) terminal_ok = false;

    NetworkConfig net_cfg = cfg.network;
    net_cfg.seed = network_seed_for_run(cfg, cfg.seeds.front());
    NetworkState net = init_network(net_cfg, ds.items(), ds.features());
    train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq, cfg.train_options());
    double worst_intact = 0.0;
    for (const auto& e : per_level_error(forward(net, ds.X), ds))
      worst_intact = std::max(worst_intact, e.percent);

    report(8, terminal_ok && worst_intact <= 0.1,
           std::string("fully atrophied nets at exactly 100% per level: ") +
               (terminal_ok ? "yes" : "no") + "; intact converged net worst "
               "level error " + fmt(worst_intact) + "% (<= 0.1)");
  }

  // ---- Criterion 9: byte-identical outputs across reruns and worker counts.
  {
    ExperimentConfig small = parse_config(R"([tree]
depth = 3

[network]
hidden = 4

[experiment]
seeds = 1 2 3

[schedule base]
relearn_epochs = 0

[schedule relearn]
relearn_epochs = 50
)");

    const auto slurp_csvs = [](const std::string& dir) {
      std::map<std::string, std::string> out;
      for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), dir).string();
        if (rel.ends_with(".csv") || rel.ends_with(".txt"))
          out[rel] = read_file(entry.path().string());
      }
      return out;
    };

    bool identical = true;
    std::map<std::string, std::string> reference;
    for (int variant = 0; variant < 3; ++variant) {
      const std::string dir = "acceptance_out/v" + std::to_string(variant);
      std::error_code ec;
      fs::remove_all(dir, ec);
      RunnerOptions opts;
      opts.workers = variant == 2 ? 3 : 1;
      opts.output_dir_override = dir;
      run_experiment(small, opts);
      const auto files = slurp_csvs(dir);
      if (variant == 0)
        reference = files;
      else if (files != reference)
        identical = false;
      fs::remove_all(dir, ec);
    }
    std::error_code ec;
    fs::remove_all("acceptance_out", ec);
    report(9, identical,
           "three invocations (workers 1, 1, 3) produced byte-identical "
           "CSV and text outputs");
  }

  const double total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("acceptance: %d failure(s), %.1fs total\n", failures,
              total_seconds);
  return failures == 0 ? 0 : 1;
}
