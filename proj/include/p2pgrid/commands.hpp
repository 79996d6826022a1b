#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "p2pgrid/config.hpp"
#include "p2pgrid/metrics.hpp"

namespace p2pgrid::cmd {

namespace fs = std::filesystem;

// Plays one episode with a scripted policy. Steps go to `trajectory` as JSON lines when given.
EpisodeMetrics run_scripted_episode(env::Environment& environment, const ScriptedPolicy& policy,
                                    std::uint64_t seed, long episode, std::ostream* trajectory = nullptr);

std::vector<EpisodeMetrics> simulate(const RunConfig& cfg, long episodes, std::ostream* trajectory = nullptr);

// Writes metrics.csv and trajectory.jsonl into `out_dir`.
std::vector<EpisodeMetrics> cmd_simulate(const RunConfig& cfg, long episodes, const fs::path& out_dir);

// Community metrics averaged over episodes.
struct MetricSummary {
  double reward = 0.0;
  double emergency_kwh = 0.0;
  double feedin_kwh = 0.0;
  double storage_kwh = 0.0;
};
MetricSummary summarize(const std::vector<EpisodeMetrics>& metrics);

struct ComparisonRow {
  market::Mechanism mechanism;
  MetricSummary summary;
};

struct ComparisonDelta {
  market::Mechanism a;
  market::Mechanism b;
  MetricSummary diff;  // a - b
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<ComparisonDelta> deltas;
};

// Same seeds and scripted policy for every mechanism. Throws ConfigError for fewer than two.
Comparison compare(const RunConfig& cfg, const std::vector<market::Mechanism>& mechanisms, long episodes);
std::string comparison_csv(const Comparison& c);
std::string deltas_csv(const Comparison& c);

// Writes compare.csv and compare_deltas.csv.
Comparison cmd_compare(const RunConfig& cfg, const std::vector<market::Mechanism>& mechanisms, long episodes,
                       const fs::path& out_dir);

struct TrainOutcome {
  std::vector<EpisodeMetrics> metrics;  // episodes run by this call
  long first_episode = 0;
  long next_episode = 0;
};

// Trains for `episodes` more episodes. Writes checkpoint.json, metrics.csv and manifest.json.
// With `resume`, restores out_dir/checkpoint.json and appends to metrics.csv.
TrainOutcome cmd_train(const RunConfig& cfg, long episodes, const fs::path& out_dir, bool resume);

// Converts a JSON-lines trajectory into plot-ready CSV.
std::vector<EpisodeMetrics> cmd_export(const fs::path& trajectory, const std::string& format, const fs::path& out);

}  // namespace p2pgrid::cmd
