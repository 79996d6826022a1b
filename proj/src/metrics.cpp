#include "p2pgrid/metrics.hpp"

#include <cmath>
#include <sstream>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/format.hpp"

namespace p2pgrid {

EpisodeAccumulator::EpisodeAccumulator(std::size_t agents, double dt)
    : agents_(agents),
      dt_(dt),
      reward_(agents, 0.0),
      emergency_(agents, 0.0),
      feedin_(agents, 0.0),
      storage_(agents, 0.0) {}

void EpisodeAccumulator::add(const env::StepResult& step) {
  for (std::size_t i = 0; i < agents_; ++i) {
    const auto& s = step.settlements[i];
    reward_[i] += step.rewards[i].to_double();
    emergency_[i] += s.q_e;
    feedin_[i] += s.q_fit;
    storage_[i] += step.energy[i];
    const double r = microgrid::balance_residual(step.load[i], step.gen[i], s, dt_);
    max_residual_ = std::max(max_residual_, std::abs(r));
  }
  ++steps_;
}

void EpisodeAccumulator::add(std::span<const double> reward, std::span<const double> emergency_kwh,
                             std::span<const double> feedin_kwh, std::span<const double> storage_kwh) {
  if (reward.size() != agents_ || emergency_kwh.size() != agents_ || feedin_kwh.size() != agents_ ||
      storage_kwh.size() != agents_)
    throw ShapeMismatch("episode accumulator: expected one value per agent");
  for (std::size_t i = 0; i < agents_; ++i) {
    reward_[i] += reward[i];
    emergency_[i] += emergency_kwh[i];
    feedin_[i] += feedin_kwh[i];
    storage_[i] += storage_kwh[i];
  }
  ++steps_;
}

EpisodeMetrics EpisodeAccumulator::finish(long episode) const {
  EpisodeMetrics m;
  m.episode = episode;
  m.max_balance_residual = max_residual_;
  const double hours = steps_ > 0 ? static_cast<double>(steps_) : 1.0;
  const double n = agents_ > 0 ? static_cast<double>(agents_) : 1.0;
  for (std::size_t i = 0; i < agents_; ++i) {
    m.agent_reward.push_back(reward_[i] / hours);
    m.agent_emergency_kwh.push_back(emergency_[i] / hours);
    m.agent_feedin_kwh.push_back(feedin_[i] / hours);
    m.agent_storage_kwh.push_back(storage_[i] / hours);
    m.reward += reward_[i] / hours / n;
    m.emergency_kwh += emergency_[i] / hours / n;
    m.feedin_kwh += feedin_[i] / hours / n;
    m.storage_kwh += storage_[i] / hours / n;
  }
  return m;
}

std::string metrics_csv_header(std::size_t agents) {
  std::ostringstream out;
  out << "episode";
  for (const char* name : kMetricNames) out << ',' << name;
  for (std::size_t i = 0; i < agents; ++i)
    for (const char* name : kMetricNames) out << ',' << name << '_' << i;
  return out.str();
}

std::string metrics_csv_row(const EpisodeMetrics& m) {
  std::ostringstream out;
  out << m.episode << ',' << format_double(m.reward) << ',' << format_double(m.emergency_kwh) << ','
      << format_double(m.feedin_kwh) << ',' << format_double(m.storage_kwh);
  for (std::size_t i = 0; i < m.agent_reward.size(); ++i) {
    out << ',' << format_double(m.agent_reward[i]) << ',' << format_double(m.agent_emergency_kwh[i])
        << ',' << format_double(m.agent_feedin_kwh[i]) << ',' << format_double(m.agent_storage_kwh[i]);
  }
  return out.str();
}

}  // namespace p2pgrid
