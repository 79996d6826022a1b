#include "p2pgrid/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/format.hpp"
#include "p2pgrid/rng.hpp"

namespace p2pgrid::scenario {

namespace {

HourlyCurve min_max(const HourlyCurve& curve) {
  const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end());
  HourlyCurve out{};
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (int h = 0; h < kHoursPerDay; ++h) out[h] = (curve[h] - *lo) / range;
  return out;
}

double bump(double hour, double centre, double width) {
  const double d = (hour - centre) / width;
  return std::exp(-0.5 * d * d);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

double parse_number(const std::string& text, const std::filesystem::path& path, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
  }
}

// Reads a CSV whose header must equal `header`; returns the numeric rows.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  const std::string& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw DataError(path.string() + ": expected header '" + header + "', got '" + line + "'");
  const std::size_t columns = split_csv_line(header).size();
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != columns)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(columns) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c, path, lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void DailyProfile::validate() const {
  for (int h = 0; h < kHoursPerDay; ++h) {
    if (!(load[h] >= 0.0 && load[h] <= 1.0) || !(pv[h] >= 0.0 && pv[h] <= 1.0))
      throw DataError("profile: hour " + std::to_string(h) + " outside [0, 1]");
  }
}

void PriceSchedule::validate() const {
  for (int h = 0; h < kHoursPerDay; ++h) {
    try {
      envelope(h).validate();
    } catch (const ConfigError& e) {
      throw ConfigError("prices: hour " + std::to_string(h) + ": " + e.what());
    }
  }
}

market::PriceEnvelope PriceSchedule::envelope(int hour) const {
  return {feed_in, day_ahead, emergency_price(hour, *this)};
}

PriceSchedule default_price_schedule() {
  HourlyCurve raw{};
  for (int h = 0; h < kHoursPerDay; ++h)
    raw[h] = 0.6 * bump(h, 8.0, 2.0) + 1.0 * bump(h, 19.0, 2.5);
  const HourlyCurve unit = min_max(raw);
  PriceSchedule s;
  s.feed_in = 0.2;
  s.day_ahead = 1.0;
  for (int h = 0; h < kHoursPerDay; ++h) s.emergency[h] = 1.5 + 2.0 * unit[h];
  return s;
}

PriceSchedule flat_price_schedule(double feed_in, double day_ahead, double emergency) {
  PriceSchedule s;
  s.feed_in = feed_in;
  s.day_ahead = day_ahead;
  s.emergency.fill(emergency);
  return s;
}

double emergency_price(int hour, const PriceSchedule& schedule) {
  if (hour < 0 || hour >= kHoursPerDay)
    throw IndexOutOfRange("emergency_price: hour " + std::to_string(hour) + " outside [0, 24)");
  return schedule.emergency[static_cast<std::size_t>(hour)];
}

HourlyCurve normalize_annual(std::span<const double> hourly, int first_hour) {
  if (hourly.empty()) throw EmptySeries("normalize_annual: empty series");
  if (hourly.size() < static_cast<std::size_t>(kHoursPerDay))
    throw NonHourlyData("normalize_annual: non-hourly data: need at least 24 samples");
  HourlyCurve sum{};
  std::array<std::size_t, kHoursPerDay> count{};
  for (std::size_t i = 0; i < hourly.size(); ++i) {
    if (!std::isfinite(hourly[i]))
      throw NonHourlyData("normalize_annual: non-hourly data: sample " + std::to_string(i) +
                      " is not finite");
    const std::size_t h = (static_cast<std::size_t>(first_hour) + i) % kHoursPerDay;
    sum[h] += hourly[i];
    ++count[h];
  }
  HourlyCurve mean{};
  for (int h = 0; h < kHoursPerDay; ++h) mean[h] = sum[h] / static_cast<double>(count[h]);
  return min_max(mean);
}

HourlyCurve normalize_annual(std::span<const std::int64_t> timestamps,
                             std::span<const double> values) {
  if (timestamps.empty() || values.empty()) throw EmptySeries("normalize_annual: empty series");
  if (timestamps.size() != values.size())
    throw NonHourlyData("normalize_annual: timestamp/value length mismatch");
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] - timestamps[i - 1] != 3600)
      throw NonHourlyData("normalize_annual: non-hourly data at sample " + std::to_string(i));
  }
  const std::int64_t secs = ((timestamps.front() % 86400) + 86400) % 86400;
  return normalize_annual(values, static_cast<int>(secs / 3600));
}

DailyProfile bundled_profile(std::size_t index) {
  // (evening peak hour, morning weight, pv centre, pv width, base load)
  struct Shape {
    double evening;
    double morning;
    double pv_centre;
    double pv_width;
    double base;
  };
  static constexpr std::array<Shape, 4> kShapes{{
      {19.0, 0.45, 12.5, 2.6, 0.30},
      {18.5, 0.35, 12.0, 2.9, 0.25},
      {19.5, 0.55, 13.0, 2.4, 0.35},
      {18.0, 0.40, 12.5, 3.1, 0.20},
  }};
  const Shape& s = kShapes[index % kShapes.size()];
  HourlyCurve load{};
  HourlyCurve pv{};
  for (int h = 0; h < kHoursPerDay; ++h) {
    const double hour = h + 0.5;
    load[h] = s.base + s.morning * bump(hour, 7.5, 1.5) + bump(hour, s.evening, 2.2);
    pv[h] = (hour > 5.5 && hour < 19.5) ? bump(hour, s.pv_centre, s.pv_width) : 0.0;
  }
  DailyProfile p{min_max(load), min_max(pv)};
  return p;
}

Realization sample_realization(const DailyProfile& profile,
                               const microgrid::MicrogridParams& params, double noise_sigma,
                               std::uint64_t seed, std::uint64_t agent, int horizon) {
  Realization r;
  r.load.resize(static_cast<std::size_t>(horizon));
  r.gen.resize(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    const std::size_t h = static_cast<std::size_t>(t % kHoursPerDay);
    const auto ut = static_cast<std::uint64_t>(t);
    Rng load_rng(seed, {agent, static_cast<std::uint64_t>(Stream::Load), ut});
    Rng pv_rng(seed, {agent, static_cast<std::uint64_t>(Stream::Pv), ut});
    const double ln = noise_sigma > 0.0 ? load_rng.normal(0.0, noise_sigma) : 0.0;
    const double pn = noise_sigma > 0.0 ? pv_rng.normal(0.0, noise_sigma) : 0.0;
    r.load[t] = std::clamp(params.l_max * (profile.load[h] + ln), 0.0, params.l_max);
    r.gen[t] = std::clamp(params.g_max * (profile.pv[h] + pn), 0.0, params.g_max);
  }
  return r;
}

DisruptionConfig DisruptionConfig::published() {
  DisruptionConfig c;
  c.p_sudden = 0.85;
  c.p_gradual = 0.10;
  c.p_failure = 0.01;
  return c;
}

DisruptionConfig DisruptionConfig::none() {
  DisruptionConfig c;
  c.p_sudden = c.p_gradual = c.p_failure = 0.0;
  return c;
}

void DisruptionConfig::validate() const {
  for (double p : {p_sudden, p_gradual, p_failure})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("disruption: probabilities must lie in [0, 1]");
  if (!(drop_lo >= 0.0 && drop_lo <= drop_hi && drop_hi <= 1.0))
    throw ConfigError("disruption: need 0 <= drop_lo <= drop_hi <= 1");
  if (ramp_hours < 1) throw ConfigError("disruption: ramp_hours must be >= 1");
  if (failure_hours < 1) throw ConfigError("disruption: failure_hours must be >= 1");
}

std::vector<DisruptionEvent> sample_disruption_events(const DisruptionConfig& cfg, int horizon,
                                                      std::uint64_t seed, std::uint64_t agent) {
  std::vector<DisruptionEvent> events;
  for (int t = 0; t < horizon; ++t) {
    Rng rng(seed, {agent, static_cast<std::uint64_t>(Stream::Disruption),
                   static_cast<std::uint64_t>(t)});
    const double u_sudden = rng.uniform();
    const double u_factor = rng.uniform();
    const double u_gradual = rng.uniform();
    const double u_failure = rng.uniform();
    if (u_sudden < cfg.p_sudden)
      events.push_back({DisruptionKind::SuddenDrop, t,
                        cfg.drop_lo + (cfg.drop_hi - cfg.drop_lo) * u_factor});
    if (u_gradual < cfg.p_gradual) events.push_back({DisruptionKind::GradualDecline, t, 1.0});
    if (u_failure < cfg.p_failure) events.push_back({DisruptionKind::Failure, t, 0.0});
  }
  return events;
}

std::vector<double> apply_disruption_events(std::span<const double> gen,
                                            std::span<const DisruptionEvent> events,
                                            const DisruptionConfig& cfg) {
  std::vector<double> factor(gen.size(), 1.0);
  const int n = static_cast<int>(gen.size());
  for (const auto& e : events) {
    if (e.hour < 0 || e.hour >= n) continue;
    switch (e.kind) {
      case DisruptionKind::SuddenDrop:
        factor[e.hour] *= e.factor;
        break;
      case DisruptionKind::GradualDecline:
        for (int t = e.hour; t < n; ++t) {
          const double progress = std::min(1.0, (t - e.hour + 1) / static_cast<double>(cfg.ramp_hours));
          factor[t] *= 1.0 - 0.5 * progress;
        }
        break;
      case DisruptionKind::Failure:
        for (int t = e.hour; t < std::min(n, e.hour + cfg.failure_hours); ++t) factor[t] = 0.0;
        break;
    }
  }
  std::vector<double> out(gen.size());
  for (std::size_t t = 0; t < gen.size(); ++t) out[t] = std::max(0.0, gen[t] * factor[t]);
  return out;
}

std::vector<double> apply_pv_disruption(std::span<const double> gen, const DisruptionConfig& cfg,
                                        std::uint64_t seed, std::uint64_t agent) {
  const auto events = sample_disruption_events(cfg, static_cast<int>(gen.size()), seed, agent);
  return apply_disruption_events(gen, events, cfg);
}

DailyProfile load_profile_csv(const std::filesystem::path& path) {
  const auto rows = read_numeric_csv(path, "hour,load,pv");
  if (rows.size() != kHoursPerDay)
    throw DataError(path.string() + ": expected 24 rows, got " + std::to_string(rows.size()));
  DailyProfile p;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][0] != static_cast<double>(i))
      throw DataError(path.string() + ": hours must run 0..23 in order");
    p.load[i] = rows[i][1];
    p.pv[i] = rows[i][2];
  }
  p.validate();
  return p;
}

void write_profile_csv(const std::filesystem::path& path, const DailyProfile& profile) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "hour,load,pv\n";
  for (int h = 0; h < kHoursPerDay; ++h)
    out << h << ',' << format_double(profile.load[h]) << ',' << format_double(profile.pv[h]) << '\n';
}

HourlyCurve load_emergency_csv(const std::filesystem::path& path) {
  const auto rows = read_numeric_csv(path, "hour,emergency");
  if (rows.size() != kHoursPerDay)
    throw DataError(path.string() + ": expected 24 rows, got " + std::to_string(rows.size()));
  HourlyCurve c{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][0] != static_cast<double>(i))
      throw DataError(path.string() + ": hours must run 0..23 in order");
    c[i] = rows[i][1];
  }
  return c;
}

DailyProfile ingest_raw_csv(const std::filesystem::path& path) {
  const auto rows = read_numeric_csv(path, "timestamp,load,pv");
  std::vector<std::int64_t> ts;
  std::vector<double> load;
  std::vector<double> pv;
  for (const auto& r : rows) {
    ts.push_back(static_cast<std::int64_t>(r[0]));
    load.push_back(r[1]);
    pv.push_back(r[2]);
  }
  return {normalize_annual(ts, load), normalize_annual(ts, pv)};
}

}  // namespace p2pgrid::scenario
