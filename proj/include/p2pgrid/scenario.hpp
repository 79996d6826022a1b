#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "p2pgrid/market.hpp"
#include "p2pgrid/microgrid.hpp"

namespace p2pgrid::scenario {

inline constexpr int kHoursPerDay = 24;
using HourlyCurve = std::array<double, kHoursPerDay>;

// Representative day, both curves normalized to [0, 1].
struct DailyProfile {
  HourlyCurve load{};
  HourlyCurve pv{};

  // Throws DataError if any value is outside [0, 1] or not finite.
  void validate() const;
};

struct PriceSchedule {
  double feed_in = 0.2;
  double day_ahead = 1.0;
  HourlyCurve emergency{};

  // Checks the price ordering at every hour. Throws ConfigError.
  void validate() const;
  market::PriceEnvelope envelope(int hour) const;
};

// Smooth two-peak emergency curve spanning exactly [1.5, 3.5], feed-in 0.2, day-ahead 1.0.
PriceSchedule default_price_schedule();
PriceSchedule flat_price_schedule(double feed_in, double day_ahead, double emergency);

// Emergency price at `hour`. Throws IndexOutOfRange outside [0, 24).
double emergency_price(int hour, const PriceSchedule& schedule);

// Mean per hour of day, then min-max scaled to [0, 1]. A constant series maps to all zeros.
// The first sample is taken as hour `first_hour` of its day. Throws EmptySeries, or
// NonHourlyData for non-finite samples and series shorter than a day.
HourlyCurve normalize_annual(std::span<const double> hourly, int first_hour = 0);

// Same, for timestamped samples (unix seconds). Samples must be exactly one hour apart.
HourlyCurve normalize_annual(std::span<const std::int64_t> timestamps,
                             std::span<const double> values);

// Bundled synthetic profiles for the four reference microgrids: evening-peak residential
// load and a midday PV bell, varied per site.
DailyProfile bundled_profile(std::size_t index);

struct Realization {
  std::vector<double> load;  // kWh per hour
  std::vector<double> gen;   // kWh per hour
};

// load_t = clamp(l_max * (profile.load[t] + N(0, sigma)), 0, l_max), likewise PV with g_max.
// Draws come from per-(agent, hour) streams of `seed`.
Realization sample_realization(const DailyProfile& profile,
                               const microgrid::MicrogridParams& params, double noise_sigma,
                               std::uint64_t seed, std::uint64_t agent, int horizon);

struct DisruptionConfig {
  double p_sudden = 0.15;
  double p_gradual = 0.10;
  double p_failure = 0.01;
  double drop_lo = 0.5;
  double drop_hi = 0.9;
  int ramp_hours = 3;
  int failure_hours = kHoursPerDay;

  // Hourly probabilities exactly as published (0.85, 0.10, 0.01).
  static DisruptionConfig published();
  static DisruptionConfig none();
  void validate() const;
};

enum class DisruptionKind { SuddenDrop, GradualDecline, Failure };

struct DisruptionEvent {
  DisruptionKind kind = DisruptionKind::SuddenDrop;
  int hour = 0;
  double factor = 1.0;  // sudden drop multiplier
};

std::vector<DisruptionEvent> sample_disruption_events(const DisruptionConfig& cfg, int horizon,
                                                      std::uint64_t seed, std::uint64_t agent);

// Applies events multiplicatively:
//   sudden drop   - that hour times `factor`
//   gradual       - linear ramp to 50% over ramp_hours, held to the end
//   failure       - zero for failure_hours hours
std::vector<double> apply_disruption_events(std::span<const double> gen,
                                            std::span<const DisruptionEvent> events,
                                            const DisruptionConfig& cfg);

std::vector<double> apply_pv_disruption(std::span<const double> gen, const DisruptionConfig& cfg,
                                        std::uint64_t seed, std::uint64_t agent);

// CSV with header `hour,load,pv` and 24 normalized rows.
DailyProfile load_profile_csv(const std::filesystem::path& path);
void write_profile_csv(const std::filesystem::path& path, const DailyProfile& profile);
// CSV with header `hour,emergency` and 24 rows.
HourlyCurve load_emergency_csv(const std::filesystem::path& path);
// Raw measurements with header `timestamp,load,pv` (unix seconds, hourly), normalized per column.
DailyProfile ingest_raw_csv(const std::filesystem::path& path);

}  // namespace p2pgrid::scenario
