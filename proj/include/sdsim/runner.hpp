#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdsim/config.hpp"

namespace sdsim {

struct RunnerOptions {
  int workers = 1;
  std::uint64_t seed_offset = 0;
  std::string output_dir_override;  // empty keeps the config's output_dir
};

struct RunFileEntry {
  std::string path;  // relative to the output directory
  std::string digest;
};

struct RunRecord {
  std::string id;
  std::uint64_t seed = 0;  // effective master seed (offset applied)
  std::string schedule;
  std::string status;  // completed | reused | failed
  std::string message;
  std::vector<RunFileEntry> files;
};

struct RunManifest {
  std::string tool_version;
  std::uint64_t seed_offset = 0;
  std::string config_text;  // canonical echo of the executed config
  std::vector<RunFileEntry> globals;
  std::vector<RunRecord> runs;

  bool all_completed() const;
};

// Executes the full grid (seeds x schedules). One network is trained per
// seed and shared by that seed's schedules, so deletion order is matched
// pairwise across conditions. Grid cells already present on disk with
// matching digests are reused, not recomputed. Outputs are byte-identical
// across repeated invocations and across worker counts.
RunManifest run_experiment(const ExperimentConfig& cfg,
                           const RunnerOptions& opts = {});

void write_manifest_file(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest_file(const std::string& path);

enum class PlotKind { LevelCurves, TaxonomyTimeline, Spectrum };

PlotKind plot_kind_from_string(const std::string& s);

// Tidy long-format CSVs derived from a completed experiment directory.
// Returns the written file paths.
std::vector<std::string> emit_plotdata(const std::string& out_dir,
                                       PlotKind kind);

// Recomputes every analysis output from the stored snapshot bundles (no
// retraining). Returns the number of runs processed.
int reanalyze(const std::string& out_dir);

// Invariant suite; with a non-empty out_dir it additionally re-parses every
// emitted CSV against its schema and verifies manifest digests. Logs one
// line per check and returns the number of failures.
int selfcheck(const std::string& out_dir, std::ostream& log);

}  // namespace sdsim
