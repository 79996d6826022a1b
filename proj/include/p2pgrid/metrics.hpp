#pragma once

#include <span>
#include <string>
#include <vector>

#include "p2pgrid/env.hpp"

namespace p2pgrid {

// Hourly means for one episode: reward, emergency bought, feed-in sold and stored energy.
// Community values average over hours and agents; per-agent values over hours.
struct EpisodeMetrics {
  long episode = 0;
  double reward = 0.0;
  double emergency_kwh = 0.0;
  double feedin_kwh = 0.0;
  double storage_kwh = 0.0;
  std::vector<double> agent_reward;
  std::vector<double> agent_emergency_kwh;
  std::vector<double> agent_feedin_kwh;
  std::vector<double> agent_storage_kwh;
  // Largest |power balance residual| seen during the episode.
  double max_balance_residual = 0.0;
};

inline constexpr const char* kMetricNames[] = {"reward", "emergency_kwh", "feedin_kwh", "storage_kwh"};

class EpisodeAccumulator {
 public:
  explicit EpisodeAccumulator(std::size_t agents, double dt = 1.0);
  void add(const env::StepResult& step);
  // One hour from already extracted per-agent values.
  void add(std::span<const double> reward, std::span<const double> emergency_kwh,
           std::span<const double> feedin_kwh, std::span<const double> storage_kwh);
  EpisodeMetrics finish(long episode) const;
  int steps() const { return steps_; }

 private:
  std::size_t agents_;
  double dt_;
  int steps_ = 0;
  std::vector<double> reward_, emergency_, feedin_, storage_;
  double max_residual_ = 0.0;
};

std::string metrics_csv_header(std::size_t agents);
std::string metrics_csv_row(const EpisodeMetrics& m);

}  // namespace p2pgrid
