#include "sdsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sdsim/errors.hpp"
#include "sdsim/rng.hpp"
#include "sdsim/textio.hpp"
#include "sdsim/trajectory_stats.hpp"
#include "sdsim/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace sdsim {

namespace {

std::string trajectory_name(const std::string& id) { return "trajectory_" + id + ".csv"; }
std::string responses_name(const std::string& id) { return "responses_" + id + ".csv"; }
std::string snapshots_name(const std::string& id) { return "snapshots_" + id + ".txt"; }
std::string cell_name(const std::string& id) { return "cells/" + id + ".json"; }

constexpr const char* kTrajectoryHeader =
    "step,alive,level,normalized_error,loss_pre,loss_post";
constexpr const char* kResponsesHeader = "step,item,decoded_item,taxonomy";

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty set");
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct TrajectoryRow {
  int step = 0;
  int alive = 0;
  int level = 0;
  double percent = 0.0;
  double loss_pre = 0.0;
  double loss_post = 0.0;
};

struct ResponseRow {
  int step = 0;
  int item = 0;  // 1-based in the file
  std::optional<int> decoded;
  std::string taxonomy;
};

std::vector<TrajectoryRow> parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(kTrajectoryHeader))
    throw RuntimeFault("trajectory csv: bad header");
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw RuntimeFault("trajectory csv: bad row");
    TrajectoryRow r;
    r.step = static_cast<int>(parse_long(f[0]));
    r.alive = static_cast<int>(parse_long(f[1]));
    r.level = static_cast<int>(parse_long(f[2]));
    r.percent = parse_double(f[3]);
    r.loss_pre = parse_double(f[4]);
    r.loss_post = parse_double(f[5]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<ResponseRow> parse_responses_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(kResponsesHeader))
    throw RuntimeFault("responses csv: bad header");
  std::vector<ResponseRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw RuntimeFault("responses csv: bad row");
    ResponseRow r;
    r.step = static_cast<int>(parse_long(f[0]));
    r.item = static_cast<int>(parse_long(f[1]));
    if (!f[2].empty()) r.decoded = static_cast<int>(parse_long(f[2]));
    r.taxonomy = f[3];
    rows.push_back(r);
  }
  return rows;
}

std::string render_spectrum_csv(const Dataset& ds) {
  const ModeSpectrum spec = mode_spectrum(ds);
  std::ostringstream os;
  os << "mode,singular_value,level\n";
  for (Eigen::Index m = 0; m < spec.singular_values.size(); ++m)
    os << m + 1 << ',' << format_g17(spec.singular_values(m)) << ','
       << spec.level_assignment[static_cast<std::size_t>(m)] << '\n';
  return os.str();
}

// First step at which the deleted fraction reaches the checkpoint.
int checkpoint_step(const std::vector<TrajectoryRow>& rows, int hidden,
                    double fraction) {
  const int target = static_cast<int>(
      std::ceil(fraction * static_cast<double>(hidden) - 1e-9));
  int best = 0;
  for (const auto& r : rows) {
    if (hidden - r.alive >= target) return r.step;
    best = std::max(best, r.step);
  }
  return best;
}

std::string digest_of(const std::string& content) {
  return to_hex16(fnv1a64(content));
}

std::string write_output(const fs::path& dir, const std::string& rel,
                         const std::string& content) {
  write_file_atomic((dir / rel).string(), content);
  return digest_of(content);
}

ordered_json file_list_json(const std::vector<RunFileEntry>& files) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : files) arr.push_back({{"path", f.path}, {"digest", f.digest}});
  return arr;
}

std::vector<RunFileEntry> file_list_from_json(const nlohmann::json& arr) {
  std::vector<RunFileEntry> out;
  for (const auto& f : arr)
    out.push_back({f.at("path").get<std::string>(),
                   f.at("digest").get<std::string>()});
  return out;
}

bool files_match(const fs::path& dir, const std::vector<RunFileEntry>& files) {
  for (const auto& f : files) {
    const fs::path p = dir / f.path;
    if (!fs::exists(p)) return false;
    try {
      if (digest_of(read_file(p.string())) != f.digest) return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

// Writes the cross-run CSVs (level_errors, taxonomy, table1, figure1) from
// the per-run files on disk. Returns {path, digest} entries for the manifest.
std::vector<RunFileEntry> write_aggregates(const ExperimentConfig& cfg,
                                           const Dataset& ds,
                                           const std::vector<RunRecord>& runs,
                                           const fs::path& dir) {
  const int depth = cfg.tree.depth;
  const int hidden = cfg.network.hidden;

  std::ostringstream level_errors;
  level_errors << "run_id,step,level,percent\n";
  std::ostringstream taxonomy;
  taxonomy << "run_id,step,item,class,decoded_item,freq_true,freq_decoded\n";
  std::ostringstream figure1;
  figure1 << "condition,seed,step,alive,item,taxonomy,decoded_item\n";

  // condition -> checkpoint -> level -> per-seed percents
  std::map<std::string, Vector> env_freq;
  for (const auto& sched : cfg.schedules)
    env_freq[sched.name] = apply_frequency(ds, sched.frequency).freq;
  std::map<std::string, std::map<std::size_t, std::map<int, std::vector<double>>>>
      table;

  for (const auto& run : runs) {
    if (run.status == "failed") continue;
    const auto rows = parse_trajectory_csv(
        read_file((dir / trajectory_name(run.id)).string()));
    const auto resp = parse_responses_csv(
        read_file((dir / responses_name(run.id)).string()));
    const Vector& freq = env_freq.at(run.schedule);

    std::map<int, int> alive_at_step;
    for (const auto& r : rows) {
      alive_at_step[r.step] = r.alive;
      level_errors << run.id << ',' << r.step << ',' << r.level << ','
                   << format_g17(r.percent) << '\n';
    }
    for (const auto& r : resp) {
      taxonomy << run.id << ',' << r.step << ',' << r.item << ','
               << r.taxonomy << ',';
      if (r.decoded) taxonomy << *r.decoded;
      taxonomy << ',' << format_g17(freq(r.item - 1)) << ',';
      if (r.decoded) taxonomy << format_g17(freq(*r.decoded - 1));
      taxonomy << '\n';
      figure1 << run.schedule << ',' << run.seed << ',' << r.step << ','
              << alive_at_step.at(r.step) << ',' << r.item << ','
              << r.taxonomy << ',';
      if (r.decoded) figure1 << *r.decoded;
      figure1 << '\n';
    }
    for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c) {
      const int step = checkpoint_step(rows, hidden, cfg.checkpoints[c]);
      for (const auto& r : rows)
        if (r.step == step)
          table[run.schedule][c][r.level].push_back(r.percent);
    }
  }

  std::ostringstream table1;
  table1 << "condition,activation,n,checkpoint,level,percent_median,percent_mean\n";
  for (const auto& sched : cfg.schedules) {
    for (std::size_t c = 0; c < cfg.checkpoints.size(); ++c) {
      for (int level = 1; level <= depth; ++level) {
        const auto cond = table.find(sched.name);
        if (cond == table.end()) continue;
        const auto ckpt = cond->second.find(c);
        if (ckpt == cond->second.end()) continue;
        const auto values = ckpt->second.find(level);
        if (values == ckpt->second.end() || values->second.empty()) continue;
        table1 << sched.name << ',' << to_string(cfg.network.activation) << ','
               << sched.relearn_epochs << ','
               << format_g17(cfg.checkpoints[c]) << ',' << level << ','
               << format_g17(median(values->second)) << ','
               << format_g17(mean(values->second)) << '\n';
      }
    }
  }

  std::vector<RunFileEntry> out;
  out.push_back({"level_errors.csv", write_output(dir, "level_errors.csv", level_errors.str())});
  out.push_back({"taxonomy.csv", write_output(dir, "taxonomy.csv", taxonomy.str())});
  out.push_back({"table1.csv", write_output(dir, "table1.csv", table1.str())});
  out.push_back({"figure1.csv", write_output(dir, "figure1.csv", figure1.str())});
  return out;
}

void write_cell_file(const fs::path& dir, const RunRecord& rec) {
  ordered_json cell;
  cell["id"] = rec.id;
  cell["seed"] = rec.seed;
  cell["schedule"] = rec.schedule;
  cell["status"] = "completed";
  cell["files"] = file_list_json(rec.files);
  write_file_atomic((dir / cell_name(rec.id)).string(), cell.dump(2) + "\n");
}

std::optional<std::vector<RunFileEntry>> reusable_cell(const fs::path& dir,
                                                       const std::string& id) {
  const fs::path cell = dir / cell_name(id);
  if (!fs::exists(cell)) return std::nullopt;
  try {
    const auto parsed = nlohmann::json::parse(read_file(cell.string()));
    if (parsed.at("id").get<std::string>() != id) return std::nullopt;
    auto files = file_list_from_json(parsed.at("files"));
    if (!files_match(dir, files)) return std::nullopt;
    return files;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

bool RunManifest::all_completed() const {
  for (const auto& run : runs)
    if (run.status == "failed") return false;
  return true;
}

RunManifest run_experiment(const ExperimentConfig& cfg,
                           const RunnerOptions& opts) {
  validate_config(cfg);
  const int workers = std::max(1, opts.workers);

  // The override picks the physical destination only; config.txt echoes the
  // config exactly as given, so outputs are byte-identical across moves.
  const fs::path dir(opts.output_dir_override.empty()
                         ? cfg.output_dir
                         : opts.output_dir_override);
  fs::create_directories(dir / "cells");

  const std::string canonical = render_config(cfg);
  const HierarchyTree tree = build_hierarchy(cfg.tree);
  const Dataset ds = make_dataset(tree);

  RunManifest manifest;
  manifest.tool_version = kToolVersion;
  manifest.seed_offset = opts.seed_offset;
  manifest.config_text = canonical;
  manifest.globals.push_back(
      {"config.txt", write_output(dir, "config.txt", canonical)});
  {
    std::ostringstream bundle;
    save_dataset(ds, bundle);
    manifest.globals.push_back(
        {"dataset.txt", write_output(dir, "dataset.txt", bundle.str())});
  }
  manifest.globals.push_back(
      {"spectrum.csv", write_output(dir, "spectrum.csv", render_spectrum_csv(ds))});

  // Grid cells in deterministic order: seeds outer, schedules inner.
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_scheds = cfg.schedules.size();
  std::vector<RunRecord> records(n_seeds * n_scheds);
  std::vector<char> reusable(n_seeds * n_scheds, 0);
  for (std::size_t si = 0; si < n_seeds; ++si) {
    for (std::size_t ci = 0; ci < n_scheds; ++ci) {
      RunRecord& rec = records[si * n_scheds + ci];
      rec.seed = cfg.seeds[si] + opts.seed_offset;
      rec.schedule = cfg.schedules[ci].name;
      rec.id = run_id(cfg, rec.schedule, rec.seed);
      if (auto files = reusable_cell(dir, rec.id)) {
        rec.status = "reused";
        rec.files = std::move(*files);
        reusable[si * n_scheds + ci] = 1;
      }
    }
  }

  std::atomic<std::size_t> next_seed{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t si = next_seed.fetch_add(1);
      if (si >= n_seeds) return;

      bool need_compute = false;
      for (std::size_t ci = 0; ci < n_scheds; ++ci)
        if (!reusable[si * n_scheds + ci]) need_compute = true;
      if (!need_compute) continue;

      const std::uint64_t master = cfg.seeds[si] + opts.seed_offset;
      try {
        NetworkConfig net_cfg = cfg.network;
        net_cfg.seed = network_seed_for_run(cfg, master);
        NetworkState net = init_network(net_cfg, ds.items(), ds.features());
        const TrainReport report = train_to_convergence_inplace(
            net, ds.X, ds.Y, ds.freq, cfg.train_options());
        if (!report.converged)
          throw RuntimeFault("training did not converge within max_epochs");

        for (std::size_t ci = 0; ci < n_scheds; ++ci) {
          RunRecord& rec = records[si * n_scheds + ci];
          if (reusable[si * n_scheds + ci]) continue;
          const AtrophySchedule sched = cfg.schedules[ci].materialize(
              deletion_seed_for_run(master));
          const TrajectoryRecord traj =
              run_schedule(ds, net, sched, cfg.network.learning_rate,
                           {cfg.thresholds, cfg.naive});

          std::ostringstream tcsv, rcsv, snap;
          write_trajectory_csv(traj, tcsv);
          write_responses_csv(traj, rcsv);
          save_trajectory(traj, snap);
          rec.files.push_back({trajectory_name(rec.id),
                               write_output(dir, trajectory_name(rec.id), tcsv.str())});
          rec.files.push_back({responses_name(rec.id),
                               write_output(dir, responses_name(rec.id), rcsv.str())});
          rec.files.push_back({snapshots_name(rec.id),
                               write_output(dir, snapshots_name(rec.id), snap.str())});
          rec.status = "completed";
          write_cell_file(dir, rec);
        }
      } catch (const std::exception& e) {
        for (std::size_t ci = 0; ci < n_scheds; ++ci) {
          RunRecord& rec = records[si * n_scheds + ci];
          if (reusable[si * n_scheds + ci]) continue;
          rec.status = "failed";
          rec.message = e.what();
          rec.files.clear();
        }
      }
    }
  };

  {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  manifest.runs = std::move(records);
  for (const auto& entry : write_aggregates(cfg, ds, manifest.runs, dir))
    manifest.globals.push_back(entry);
  write_manifest_file(manifest, (dir / "manifest.json").string());
  return manifest;
}

void write_manifest_file(const RunManifest& manifest, const std::string& path) {
  ordered_json doc;
  doc["tool_version"] = manifest.tool_version;
  doc["seed_offset"] = manifest.seed_offset;
  doc["config"] = manifest.config_text;
  doc["globals"] = file_list_json(manifest.globals);
  ordered_json runs = ordered_json::array();
  for (const auto& run : manifest.runs) {
    ordered_json r;
    r["id"] = run.id;
    r["seed"] = run.seed;
    r["schedule"] = run.schedule;
    r["status"] = run.status;
    r["message"] = run.message;
    r["files"] = file_list_json(run.files);
    runs.push_back(std::move(r));
  }
  doc["runs"] = std::move(runs);
  write_file_atomic(path, doc.dump(2) + "\n");
}

RunManifest load_manifest_file(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeFault(std::string("manifest parse error: ") + e.what());
  }
  try {
    RunManifest manifest;
    manifest.tool_version = doc.at("tool_version").get<std::string>();
    manifest.seed_offset = doc.at("seed_offset").get<std::uint64_t>();
    manifest.config_text = doc.at("config").get<std::string>();
    manifest.globals = file_list_from_json(doc.at("globals"));
    for (const auto& r : doc.at("runs")) {
      RunRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.seed = r.at("seed").get<std::uint64_t>();
      rec.schedule = r.at("schedule").get<std::string>();
      rec.status = r.at("status").get<std::string>();
      rec.message = r.at("message").get<std::string>();
      rec.files = file_list_from_json(r.at("files"));
      manifest.runs.push_back(std::move(rec));
    }
    return manifest;
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeFault(std::string("manifest schema error: ") + e.what());
  }
}

PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "level_curves") return PlotKind::LevelCurves;
  if (s == "taxonomy_timeline") return PlotKind::TaxonomyTimeline;
  if (s == "spectrum") return PlotKind::Spectrum;
  throw ConfigError("unknown plotdata kind '" + s +
                    "' (expected level_curves, taxonomy_timeline or spectrum)");
}

std::vector<std::string> emit_plotdata(const std::string& out_dir,
                                       PlotKind kind) {
  const fs::path dir(out_dir);
  const RunManifest manifest =
      load_manifest_file((dir / "manifest.json").string());

  std::vector<std::string> written;
  if (kind == PlotKind::Spectrum) {
    const Dataset ds = load_dataset_file((dir / "dataset.txt").string());
    write_output(dir, "plot_spectrum.csv", render_spectrum_csv(ds));
    written.push_back((dir / "plot_spectrum.csv").string());
    return written;
  }

  std::ostringstream os;
  if (kind == PlotKind::LevelCurves)
    os << "condition,seed,step,alive,level,percent\n";
  else
    os << "condition,seed,step,item,taxonomy,decoded_item\n";

  bool any = false;
  for (const auto& run : manifest.runs) {
    if (run.status == "failed") continue;
    any = true;
    if (kind == PlotKind::LevelCurves) {
      const auto rows = parse_trajectory_csv(
          read_file((dir / trajectory_name(run.id)).string()));
      for (const auto& r : rows)
        os << run.schedule << ',' << run.seed << ',' << r.step << ','
           << r.alive << ',' << r.level << ',' << format_g17(r.percent)
           << '\n';
    } else {
      const auto rows = parse_responses_csv(
          read_file((dir / responses_name(run.id)).string()));
      for (const auto& r : rows) {
        os << run.schedule << ',' << run.seed << ',' << r.step << ','
           << r.item << ',' << r.taxonomy << ',';
        if (r.decoded) os << *r.decoded;
        os << '\n';
      }
    }
  }
  if (!any) throw RuntimeFault("no completed runs in " + out_dir);

  const std::string name = kind == PlotKind::LevelCurves
                               ? "plot_level_curves.csv"
                               : "plot_taxonomy_timeline.csv";
  write_output(dir, name, os.str());
  written.push_back((dir / name).string());
  return written;
}

int reanalyze(const std::string& out_dir) {
  const fs::path dir(out_dir);
  RunManifest manifest = load_manifest_file((dir / "manifest.json").string());
  const ExperimentConfig cfg = parse_config(manifest.config_text);
  const Dataset ds = load_dataset_file((dir / "dataset.txt").string());

  int processed = 0;
  for (auto& run : manifest.runs) {
    if (run.status == "failed") continue;
    std::ifstream snap(dir / snapshots_name(run.id));
    if (!snap) throw RuntimeFault("missing snapshot bundle for run " + run.id);
    TrajectoryRecord traj = load_trajectory(snap);
    for (auto& rec : traj.steps) {
      rec.level_errors = per_level_error(rec.yhat, ds, cfg.naive);
      rec.responses.clear();
      for (int p = 0; p < ds.items(); ++p)
        rec.responses.push_back(
            classify_response(rec.yhat.col(p), p, ds, cfg.thresholds));
    }
    std::ostringstream tcsv, rcsv;
    write_trajectory_csv(traj, tcsv);
    write_responses_csv(traj, rcsv);
    run.files.clear();
    run.files.push_back({trajectory_name(run.id),
                         write_output(dir, trajectory_name(run.id), tcsv.str())});
    run.files.push_back({responses_name(run.id),
                         write_output(dir, responses_name(run.id), rcsv.str())});
    run.files.push_back({snapshots_name(run.id),
                         digest_of(read_file((dir / snapshots_name(run.id)).string()))});
    write_cell_file(dir, run);
    ++processed;
  }

  // Rebuild the cross-run CSVs and refresh their digests.
  std::vector<RunFileEntry> globals;
  for (const auto& g : manifest.globals)
    if (g.path == "config.txt" || g.path == "dataset.txt" || g.path == "spectrum.csv")
      globals.push_back(g);
  for (const auto& entry : write_aggregates(cfg, ds, manifest.runs, dir))
    globals.push_back(entry);
  manifest.globals = std::move(globals);
  write_manifest_file(manifest, (dir / "manifest.json").string());
  return processed;
}

int selfcheck(const std::string& out_dir, std::ostream& log) {
  int failures = 0;
  const auto check = [&](const std::string& name, bool ok,
                         const std::string& detail = "") {
    if (ok) {
      log << "ok - " << name << '\n';
    } else {
      ++failures;
      log << "FAIL - " << name << (detail.empty() ? "" : ": " + detail) << '\n';
    }
  };

  try {
    const HierarchyTree tree = build_hierarchy({2, 4, 0});
    const Dataset ds = make_dataset(tree);

    // Ancestor-indicator columns, by brute-force tree walk.
    bool indicator_ok = true;
    for (int p = 0; p < ds.items() && indicator_ok; ++p)
      for (int f = 0; f < ds.features() && indicator_ok; ++f)
        if ((ds.Y(f, p) == 1.0) != tree.is_ancestor_or_self(f, p))
          indicator_ok = false;
    check("dataset ancestor indicator", indicator_ok);

    // The zero predictor is the 100% reference at every level, exactly.
    const auto naive = per_level_error(Matrix::Zero(ds.features(), ds.items()), ds);
    bool naive_ok = true;
    for (const auto& e : naive)
      if (e.percent != 100.0) naive_ok = false;
    check("naive consistency", naive_ok);

    // Taxonomy totality over random outputs.
    {
      std::mt19937_64 gen(0xF00D);
      bool total_ok = true;
      for (int trial = 0; trial < 100000 && total_ok; ++trial) {
        Vector y(ds.features());
        for (Eigen::Index f = 0; f < y.size(); ++f)
          y(f) = uniform_real(gen, -1.5, 1.5);
        try {
          (void)classify_response(y, static_cast<int>(gen() % 8), ds, {});
        } catch (const std::exception&) {
          total_ok = false;
        }
      }
      check("taxonomy totality fuzz", total_ok);
    }

    // Decode determinism and the documented lowest-index tie break.
    check("decode tie break", decode_item(Vector::Zero(ds.features()), ds) == 0 &&
                                  decode_item(Vector::Zero(ds.features()), ds) == 0);

    // Round trips.
    {
      std::ostringstream bundle;
      save_dataset(apply_frequency(ds, FrequencySpec::odd_items_double()), bundle);
      std::istringstream back(bundle.str());
      const Dataset again = load_dataset(back);
      std::ostringstream bundle2;
      save_dataset(again, bundle2);
      check("dataset bundle round-trip", bundle.str() == bundle2.str());
    }
    {
      NetworkConfig nc;
      nc.hidden = 8;
      nc.seed = 11;
      NetworkState net = init_network(nc, ds.items(), ds.features());
      TrainOptions topts;
      topts.epsilon = 1e-6;
      train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq, topts);
      std::ostringstream ck;
      save_checkpoint(net, ck);
      std::istringstream back(ck.str());
      const NetworkState again = load_checkpoint(back);
      check("checkpoint round-trip",
            again.w1 == net.w1 && again.w2 == net.w2 && again.alive == net.alive);
    }
    {
      const ExperimentConfig cfg;
      check("config round-trip", parse_config(render_config(cfg)) == cfg);
    }

    // A small trajectory: Eckart-Young dominance, monotone degradation for
    // n = 0, and the exact terminal state.
    {
      NetworkConfig nc;
      nc.hidden = 8;
      nc.seed = 3;
      NetworkState net = init_network(nc, ds.items(), ds.features());
      TrainOptions topts;
      train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq, topts);

      AtrophySchedule relearn;
      relearn.deletion_seed = 5;
      relearn.relearn_epochs = 300;
      const TrajectoryRecord traj = run_schedule(ds, net, relearn, nc.learning_rate);
      bool ey_ok = true;
      const int max_rank = static_cast<int>(std::min(ds.Y.rows(), ds.Y.cols()));
      for (const auto& rec : traj.steps) {
        const Matrix oracle =
            truncated_svd_oracle(ds, std::min(rec.alive, max_rank));
        if (weighted_sse(oracle, ds) > weighted_sse(rec.yhat, ds) + 1e-9)
          ey_ok = false;
      }
      check("eckart-young dominance", ey_ok);

      AtrophySchedule base;
      base.deletion_seed = 5;
      const TrajectoryRecord bt = run_schedule(ds, net, base, nc.learning_rate);
      bool monotone_ok = true;
      double prev = -1.0;
      for (const auto& rec : bt.steps) {
        double sse = 0.0, naive_sse = 0.0;
        for (const auto& e : rec.level_errors) {
          sse += e.sse;
          naive_sse += e.naive_sse;
        }
        const double total = 100.0 * sse / naive_sse;
        if (total < prev - 1e-9) monotone_ok = false;
        prev = total;
      }
      check("monotone degradation without relearning", monotone_ok);

      const auto& last = bt.steps.back();
      bool terminal_ok = last.alive == 0 && last.yhat.cwiseAbs().maxCoeff() == 0.0;
      for (const auto& e : last.level_errors)
        if (e.percent != 100.0) terminal_ok = false;
      check("terminal state", terminal_ok);
    }
  } catch (const std::exception& e) {
    check("invariant suite", false, e.what());
  }

  if (!out_dir.empty()) {
    try {
      const fs::path dir(out_dir);
      const RunManifest manifest =
          load_manifest_file((dir / "manifest.json").string());
      check("manifest digests",
            files_match(dir, manifest.globals) &&
                [&] {
                  for (const auto& run : manifest.runs)
                    if (run.status != "failed" && !files_match(dir, run.files))
                      return false;
                  return true;
                }());

      (void)parse_config(manifest.config_text);
      (void)load_dataset_file((dir / "dataset.txt").string());
      bool schemas_ok = true;
      std::string detail;
      for (const auto& run : manifest.runs) {
        if (run.status == "failed") continue;
        try {
          (void)parse_trajectory_csv(
              read_file((dir / trajectory_name(run.id)).string()));
          (void)parse_responses_csv(
              read_file((dir / responses_name(run.id)).string()));
          std::ifstream snap(dir / snapshots_name(run.id));
          (void)load_trajectory(snap);
        } catch (const std::exception& e) {
          schemas_ok = false;
          detail = run.id + ": " + e.what();
        }
      }
      check("emitted files parse back", schemas_ok, detail);
    } catch (const std::exception& e) {
      check("experiment directory", false, e.what());
    }
  }

  return failures;
}

}  // namespace sdsim
