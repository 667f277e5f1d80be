#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "sdsim/config.hpp"
#include "sdsim/errors.hpp"
#include "sdsim/runner.hpp"
#include "sdsim/version.hpp"

namespace {

sdsim::ExperimentConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) {
    sdsim::ExperimentConfig cfg;
    sdsim::validate_config(cfg);
    return cfg;
  }
  return sdsim::load_config_file(config_path);
}

std::string effective_dir(const sdsim::ExperimentConfig& cfg,
                          const std::string& out_override) {
  return out_override.empty() ? cfg.output_dir : out_override;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator of progressive hidden-layer atrophy "
               "with relearning in a two-layer semantic network"};
  app.set_version_flag("--version", sdsim::kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int workers = 1;
  std::uint64_t seed_offset = 0;
  std::string plot_kind = "level_curves";

  auto* generate = app.add_subcommand(
      "generate", "Write the dataset bundle for the configured hierarchy");
  generate->add_option("--config", config_path, "experiment config file");
  generate->add_option("--out", out_dir, "output directory override");

  auto* train = app.add_subcommand(
      "train", "Train one network to convergence and write a checkpoint");
  train->add_option("--config", config_path, "experiment config file");
  train->add_option("--out", out_dir, "output directory override");

  auto* run = app.add_subcommand(
      "run", "Run the full experiment grid (seeds x schedules)");
  run->add_option("--config", config_path, "experiment config file");
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--workers", workers, "concurrent grid workers")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed-offset", seed_offset, "added to every master seed");

  auto* analyze = app.add_subcommand(
      "analyze", "Recompute analyses from stored trajectory snapshots");
  analyze->add_option("--out", out_dir, "experiment directory")->required();

  auto* plotdata = app.add_subcommand(
      "plotdata", "Emit tidy plot-ready CSVs from a completed experiment");
  plotdata->add_option("--out", out_dir, "experiment directory")->required();
  plotdata->add_option("--kind", plot_kind,
                       "level_curves | taxonomy_timeline | spectrum");

  auto* selfcheck = app.add_subcommand(
      "selfcheck", "Run the invariant suite (optionally over an output dir)");
  selfcheck->add_option("--out", out_dir, "experiment directory to validate");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto cfg = load_or_default(config_path);
      const auto dir = effective_dir(cfg, out_dir);
      std::filesystem::create_directories(dir);
      const auto ds = sdsim::make_dataset(sdsim::build_hierarchy(cfg.tree));
      const auto path = dir + "/dataset.txt";
      sdsim::save_dataset_file(ds, path);
      std::cout << "wrote " << path << " (" << ds.items() << " items, "
                << ds.features() << " features)\n";
      return 0;
    }

    if (train->parsed()) {
      const auto cfg = load_or_default(config_path);
      const auto dir = effective_dir(cfg, out_dir);
      std::filesystem::create_directories(dir);
      const auto ds = sdsim::make_dataset(sdsim::build_hierarchy(cfg.tree));
      auto net = sdsim::init_network(cfg.network, ds.items(), ds.features());
      const auto report = sdsim::train_to_convergence_inplace(
          net, ds.X, ds.Y, ds.freq, cfg.train_options());
      const auto path = dir + "/checkpoint.txt";
      sdsim::save_checkpoint_file(net, path);
      std::cout << "wrote " << path << " (epochs " << report.epochs_run
                << ", loss " << report.final_loss << ", converged "
                << (report.converged ? "yes" : "no") << ")\n";
      if (!report.converged) {
        std::cerr << "error: training did not converge within max_epochs\n";
        return 2;
      }
      return 0;
    }

    if (run->parsed()) {
      const auto cfg = load_or_default(config_path);
      sdsim::RunnerOptions opts;
      opts.workers = workers;
      opts.seed_offset = seed_offset;
      opts.output_dir_override = out_dir;
      const auto manifest = sdsim::run_experiment(cfg, opts);
      for (const auto& rec : manifest.runs) {
        std::cout << rec.id << " seed=" << rec.seed
                  << " schedule=" << rec.schedule << " " << rec.status;
        if (!rec.message.empty()) std::cout << " (" << rec.message << ")";
        std::cout << "\n";
      }
      if (!manifest.all_completed()) {
        std::cerr << "error: some runs failed; see manifest.json\n";
        return 2;
      }
      std::cout << "ok: " << manifest.runs.size() << " runs in "
                << effective_dir(cfg, out_dir) << "\n";
      return 0;
    }

    if (analyze->parsed()) {
      const int n = sdsim::reanalyze(out_dir);
      std::cout << "reanalyzed " << n << " runs in " << out_dir << "\n";
      return 0;
    }

    if (plotdata->parsed()) {
      const auto kind = sdsim::plot_kind_from_string(plot_kind);
      for (const auto& path : sdsim::emit_plotdata(out_dir, kind))
        std::cout << "wrote " << path << "\n";
      return 0;
    }

    if (selfcheck->parsed()) {
      const int failures = sdsim::selfcheck(out_dir, std::cout);
      if (failures > 0) {
        std::cerr << "error: " << failures << " selfcheck failure(s)\n";
        return 3;
      }
      std::cout << "selfcheck passed\n";
      return 0;
    }
  } catch (const sdsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
