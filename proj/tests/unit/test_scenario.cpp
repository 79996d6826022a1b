#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/scenario.hpp"

namespace p2pgrid::scenario {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "p2pgrid_tests";
  fs::create_directories(dir);
  return dir / name;
}

TEST(NormalizeAnnual, ConstantMapsToZero) {
  std::vector<double> v(48, 3.5);
  for (double x : normalize_annual(v)) EXPECT_EQ(x, 0.0);
}

TEST(NormalizeAnnual, TwoDaysOfHourIndex) {
  std::vector<double> v;
  for (int d = 0; d < 2; ++d)
    for (int h = 0; h < 24; ++h) v.push_back(h);
  const auto c = normalize_annual(v);
  for (int h = 0; h < 24; ++h) EXPECT_NEAR(c[h], h / 23.0, 1e-15);
}

TEST(NormalizeAnnual, Errors) {
  std::vector<double> v(48, 1.0);
  v[5] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(normalize_annual(v), NonHourlyData);
  EXPECT_THROW(normalize_annual(std::vector<double>{}), EmptySeries);
  EXPECT_THROW(normalize_annual(std::vector<double>(10, 1.0)), NonHourlyData);
  std::vector<std::int64_t> ts{0, 3600, 7300};
  std::vector<double> vals{1, 2, 3};
  EXPECT_THROW(normalize_annual(ts, vals), NonHourlyData);
}

TEST(NormalizeAnnual, AffineInvariant) {
  std::vector<double> v, w;
  for (int k = 0; k < 24 * 3; ++k) {
    v.push_back(std::sin(k * 0.3) + 0.1 * k);
    w.push_back(7.0 * v.back() - 3.0);
  }
  const auto a = normalize_annual(v);
  const auto b = normalize_annual(w);
  for (int h = 0; h < 24; ++h) EXPECT_NEAR(a[h], b[h], 1e-12);
}

TEST(BundledProfiles, NormalizedShapes) {
  for (std::size_t i = 0; i < 4; ++i) {
    const auto p = bundled_profile(i);
    EXPECT_NO_THROW(p.validate());
    // Evening load above the small hours; PV peaks near midday and is dark at night.
    EXPECT_GT(p.load[19], p.load[3]);
    EXPECT_GT(p.pv[12], 0.8);
    EXPECT_EQ(p.pv[0], 0.0);
  }
}

TEST(SampleRealization, Examples) {
  DailyProfile prof;
  prof.load.fill(0.2);
  prof.pv.fill(0.1);
  prof.load[12] = 0.5;
  microgrid::MicrogridParams p;
  p.l_max = 25;
  p.g_max = 5;
  const auto r = sample_realization(prof, p, 0.0, 3, 0, 24);
  EXPECT_DOUBLE_EQ(r.load[12], 12.5);
  EXPECT_DOUBLE_EQ(r.load[0], 5.0);
  EXPECT_DOUBLE_EQ(r.gen[0], 0.5);
  const auto a = sample_realization(prof, p, 0.1, 3, 1, 24);
  const auto b = sample_realization(prof, p, 0.1, 3, 1, 24);
  EXPECT_EQ(a.load, b.load);
  EXPECT_EQ(a.gen, b.gen);
  for (double x : a.load) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 25.0);
  }
  EXPECT_NE(a.load, sample_realization(prof, p, 0.1, 4, 1, 24).load);
}

TEST(Disruption, NoneIsIdentity) {
  std::vector<double> g{1, 2, 3, 4, 5};
  EXPECT_EQ(apply_pv_disruption(g, DisruptionConfig::none(), 1, 0), g);
}

TEST(Disruption, ForcedEvents) {
  std::vector<double> g(24, 2.0);
  DisruptionConfig cfg;
  cfg.failure_hours = 3;
  const std::vector<DisruptionEvent> failure{{DisruptionKind::Failure, 10, 1.0}};
  const auto f = apply_disruption_events(g, failure, cfg);
  for (int h = 0; h < 24; ++h) EXPECT_EQ(f[h], (h >= 10 && h <= 12) ? 0.0 : 2.0) << h;

  const std::vector<DisruptionEvent> drop{{DisruptionKind::SuddenDrop, 8, 0.6}};
  const auto d = apply_disruption_events(g, drop, cfg);
  EXPECT_DOUBLE_EQ(d[8], 1.2);
  EXPECT_DOUBLE_EQ(d[9], 2.0);

  const std::vector<DisruptionEvent> ramp{{DisruptionKind::GradualDecline, 4, 1.0}};
  const auto r = apply_disruption_events(g, ramp, cfg);
  EXPECT_DOUBLE_EQ(r[3], 2.0);
  EXPECT_LT(r[4], 2.0);
  EXPECT_NEAR(r[6], 1.0, 1e-12);
  EXPECT_NEAR(r[23], 1.0, 1e-12);

  const std::vector<DisruptionEvent> both{{DisruptionKind::SuddenDrop, 6, 0.5},
                                          {DisruptionKind::GradualDecline, 4, 1.0}};
  EXPECT_NEAR(apply_disruption_events(g, both, cfg)[6], 0.5, 1e-12);
}

TEST(Disruption, NeverIncreasesAndDeterministic) {
  std::vector<double> g;
  for (int h = 0; h < 24; ++h) g.push_back(std::max(0.0, std::sin(h / 24.0 * 3.14159)) * 10);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto a = apply_pv_disruption(g, DisruptionConfig::published(), seed, 2);
    EXPECT_EQ(a, apply_pv_disruption(g, DisruptionConfig::published(), seed, 2));
    for (std::size_t h = 0; h < g.size(); ++h) {
      EXPECT_LE(a[h], g[h]);
      EXPECT_GE(a[h], 0.0);
    }
  }
}

TEST(Disruption, ValidatesProbabilities) {
  DisruptionConfig cfg;
  cfg.p_failure = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_DOUBLE_EQ(DisruptionConfig::published().p_sudden, 0.85);
}

TEST(Prices, DefaultScheduleRange) {
  const auto s = default_price_schedule();
  EXPECT_NO_THROW(s.validate());
  double lo = 1e9, hi = -1e9;
  for (int t = 0; t < 24; ++t) {
    const double p = emergency_price(t, s);
    EXPECT_GE(p, 1.5);
    EXPECT_LE(p, 3.5);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
    EXPECT_DOUBLE_EQ(s.envelope(t).feed_in, 0.2);
    EXPECT_TRUE(s.envelope(t).is_valid());
  }
  EXPECT_DOUBLE_EQ(lo, 1.5);
  EXPECT_DOUBLE_EQ(hi, 3.5);
  EXPECT_THROW(emergency_price(24, s), IndexOutOfRange);
  EXPECT_THROW(emergency_price(-1, s), IndexOutOfRange);
}

TEST(Prices, FlatScheduleAndOrdering) {
  const auto s = flat_price_schedule(0.2, 1.0, 2.0);
  for (int t = 0; t < 24; ++t) EXPECT_DOUBLE_EQ(emergency_price(t, s), 2.0);
  EXPECT_THROW(flat_price_schedule(0.5, 1.0, 0.4).validate(), ConfigError);
}

TEST(Csv, ProfileRoundTrip) {
  const auto path = temp_file("profile.csv");
  const auto p = bundled_profile(2);
  write_profile_csv(path, p);
  const auto q = load_profile_csv(path);
  for (int h = 0; h < 24; ++h) {
    EXPECT_DOUBLE_EQ(p.load[h], q.load[h]);
    EXPECT_DOUBLE_EQ(p.pv[h], q.pv[h]);
  }
}

TEST(Csv, RejectsBadFiles) {
  const auto path = temp_file("bad.csv");
  std::ofstream(path) << "hour,load,pv\n0,0.5,0.2\n";
  EXPECT_THROW(load_profile_csv(path), DataError);
  std::ofstream(path) << "hour,emergency\n";
  EXPECT_THROW(load_emergency_csv(path), DataError);
  EXPECT_THROW(load_profile_csv(temp_file("missing.csv")), IoError);
}

TEST(Csv, IngestRaw) {
  const auto path = temp_file("raw.csv");
  {
    std::ofstream out(path);
    out << "timestamp,load,pv\n";
    for (int k = 0; k < 48; ++k) out << 1700000000 + 3600 * k - (1700000000 % 86400) << ',' << (k % 24) << ',' << 2 * (k % 24) << '\n';
  }
  const auto p = ingest_raw_csv(path);
  EXPECT_NEAR(p.load[23], 1.0, 1e-12);
  EXPECT_NEAR(p.pv[0], 0.0, 1e-12);
}

}  // namespace
}  // namespace p2pgrid::scenario
