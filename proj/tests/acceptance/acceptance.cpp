// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fail.
//   acceptance [--only 1,3,9] [--workdir DIR]

#include <chrono>
#include <cstdio>
#include <functional>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fuzz.hpp"
#include "gradcheck.hpp"
#include "jpq_traces.hpp"
#include "p2pgrid/commands.hpp"
#include "p2pgrid/config.hpp"
#include "p2pgrid/format.hpp"
#include "p2pgrid/io.hpp"
#include "p2pgrid/marl/ppo.hpp"
#include "p2pgrid/microgrid.hpp"

namespace fs = std::filesystem;
using namespace p2pgrid;
using market::Mechanism;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

template <class... Args>
std::string fmt_str(const char* f, Args... args) {
  const int n = std::snprintf(nullptr, 0, f, args...);
  std::string out(static_cast<std::size_t>(n), '\0');
  std::snprintf(out.data(), out.size() + 1, f, args...);
  return out;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr Mechanism kAll[] = {Mechanism::Jpq, Mechanism::Greedy, Mechanism::Mrda, Mechanism::Vvda};
constexpr std::uint64_t kFuzzSeed = 2024;
constexpr std::uint64_t kFuzzCases = 10000;

Outcome budget_balance() {
  const auto t0 = Clock::now();
  long imbalanced = 0, negative_surplus = 0;
  for (std::uint64_t k = 0; k < kFuzzCases; ++k) {
    const auto c = testing::fuzz_case(kFuzzSeed, k);
    for (auto mech : kAll) {
      const auto ledger = market::clear(mech, c.quotes, {c.m, c.envelope, {}});
      if (mech == Mechanism::Vvda)
        negative_surplus += ledger.operator_surplus() < Money();
      else
        imbalanced += ledger.total_payments() != ledger.total_receipts();
    }
  }
  const double secs = seconds_since(t0);
  return {imbalanced == 0 && negative_surplus == 0 && secs < 10.0,
          fmt_str("10000 cases x 4 mechanisms, %ld imbalanced, %ld negative VVDA surplus, %.2f s", imbalanced,
                  negative_surplus, secs)};
}

Outcome individual_rationality() {
  long cells = 0, violations = 0;
  for (std::uint64_t k = 0; k < kFuzzCases; ++k) {
    const auto c = testing::fuzz_case(kFuzzSeed, k);
    for (auto mech : kAll) {
      const auto ledger = market::clear(mech, c.quotes, {c.m, c.envelope, {}});
      for (const auto& f : ledger.fills()) {
        ++cells;
        if (!(f.ask <= f.seller_price && f.seller_price <= f.buyer_price && f.buyer_price <= f.bid)) ++violations;
      }
    }
  }
  return {violations == 0, fmt_str("%ld executed cells, %ld violations", cells, violations)};
}

Outcome jpq_hand_traces() {
  int ok = 0, total = 0;
  bool has_deficit = false, has_surplus = false, has_wrap = false;
  std::string bad;
  for (const auto& t : testing::jpq_traces()) {
    ++total;
    market::JpqStats stats;
    const auto ledger = market::clear_jpq(t.quotes, market::MarketFactor(t.m), t.emergency, &stats);
    bool same = ledger.fills().size() == t.fills.size() && stats.skips == t.skips;
    for (std::size_t k = 0; same && k < t.fills.size(); ++k) {
      const auto& f = ledger.fills()[k];
      const auto& e = t.fills[k];
      same = f.buyer == e.buyer && f.seller == e.seller && f.kwh == e.kwh &&
             Money::from_double(f.buyer_price) == Money::from_double(e.price);
    }
    ok += same;
    if (!same) bad += " " + t.name;
    has_deficit |= t.m > 0 && t.skips > 0;
    has_surplus |= t.m < 0 && t.skips > 0;
    has_wrap |= t.name.find("wrap") != std::string::npos;
  }
  // The headline 2x2 instance.
  const std::vector<market::Quotation> q{{1, 1.0, 5}, {2, 0.8, 3}, {3, -0.5, 4}, {4, -0.9, 6}};
  const auto two = market::clear_jpq(q, market::MarketFactor::balanced(), 2.0);
  const bool headline = two.fills().size() == 1 && two.fills()[0].buyer == 1 && two.fills()[0].seller == 3 &&
                        two.fills()[0].kwh == 4.0 && two.fills()[0].buyer_price == 0.75;
  const bool pass = ok == total && total >= 6 && has_deficit && has_surplus && has_wrap && headline;
  return {pass, fmt_str("2x2 instance %s; %d/%d traced instances exact%s", headline ? "1 trade 4 kWh @ 0.75" : "WRONG",
                        ok, total, bad.empty() ? "" : (", mismatched:" + bad).c_str())};
}

Outcome power_balance() {
  long steps = 0, bad_balance = 0, bad_soc = 0;
  double worst = 0.0;
  ScriptedPolicy random{ScriptedRule::Random, 0.0};
  for (auto mech : kAll) {
    env::EnvConfig cfg = env::EnvConfig::reference();
    cfg.mechanism = mech;
    cfg.disruption = scenario::DisruptionConfig::published();
    env::Environment e(cfg);
    for (long ep = 0; steps < 250L * (static_cast<long>(mech) + 1); ++ep) {
      e.reset(marl::episode_seed(99, ep));
      while (!e.done() && steps < 250L * (static_cast<long>(mech) + 1)) {
        const auto r = e.step(random.act(e.state(), cfg, 99, ep));
        ++steps;
        for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
          const auto& p = cfg.agents[i].params;
          const double res = std::abs(microgrid::balance_residual(r.load[i], r.gen[i], r.settlements[i], cfg.dt));
          worst = std::max(worst, res);
          bad_balance += res > 1e-9;
          bad_soc += r.energy[i] < p.e_min || r.energy[i] > p.e_max;
        }
      }
    }
  }
  return {bad_balance == 0 && bad_soc == 0,
          fmt_str("%ld steps, max residual %.3g kWh, %ld balance and %ld SoC violations", steps, worst, bad_balance,
                  bad_soc)};
}

Outcome gae_oracle() {
  Rng rng(kFuzzSeed, {5});
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t T = 1 + rng.index(64);
    std::vector<double> r(T), v(T);
    for (auto& x : r) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const double boot = rng.normal();
    const double gamma = rng.uniform(0.5, 0.999), lambda = rng.uniform(0.5, 0.999);
    const auto a = marl::compute_gae(r, v, boot, gamma, lambda);
    const auto o = testing::gae_oracle(r, v, boot, gamma, lambda);
    for (std::size_t t = 0; t < T; ++t) worst = std::max(worst, std::abs(a[t] - o[t]));
  }
  return {worst <= 1e-10, fmt_str("200 sequences, max abs diff %.3g", worst)};
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  testing::NetSizes desk;
  desk.obs = 44;
  desk.lstm = 32;
  desk.actor_hidden = {64, 64};
  desk.critic_hidden = {128, 64};
  double worst_actor = 0.0, worst_critic = 0.0;
  std::size_t checked = 0;
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = testing::check_actor(1000 + seed, desk, 1e-4);
    const auto c = testing::check_critic(1000 + seed, desk, 4 * desk.obs, 1e-4);
    worst_actor = std::max(worst_actor, a.max_rel_error);
    worst_critic = std::max(worst_critic, c.max_rel_error);
    checked += a.checked + c.checked;
    passed += a.pass && c.pass;
  }
  return {passed == 10, fmt_str("%d/10 nets, %zu entries, max rel error actor %.2g critic %.2g, %.1f s", passed,
                                checked, worst_actor, worst_critic, seconds_since(t0))};
}

Outcome ppo_values() {
  const std::vector<double> one{1}, two{2}, zero{0}, minus{-1};
  const double a = marl::actor_loss(one, one, zero, 0.2, 0.0);
  const double b = marl::actor_loss(two, one, zero, 0.2, 0.0);
  const double c = marl::actor_loss(two, minus, zero, 0.2, 0.0);
  return {a == -1.0 && b == -1.2 && c == 2.0, fmt_str("losses %.17g, %.17g, %.17g", a, b, c)};
}

Outcome mechanism_comparison(const fs::path& repo, const fs::path& work) {
  const auto t0 = Clock::now();
  const RunConfig cfg = load_config(repo / "configs" / "deficit_biased.json", {});
  const auto cmp = cmd::cmd_compare(cfg, {kAll, kAll + 4}, 100, work / "compare");
  double jpq = 0.0;
  for (const auto& r : cmp.rows)
    if (r.mechanism == Mechanism::Jpq) jpq = r.summary.emergency_kwh;
  bool pass = true;
  std::string detail = fmt_str("JPQ emergency %.4f kWh/ep;", jpq);
  for (const auto& r : cmp.rows) {
    if (r.mechanism == Mechanism::Jpq) continue;
    pass &= jpq <= r.summary.emergency_kwh + 1e-9;
    detail += fmt_str(" %s %+.4f", std::string(market::to_string(r.mechanism)).c_str(), jpq - r.summary.emergency_kwh);
  }
  const double secs = seconds_since(t0);
  pass &= secs < 120.0;
  return {pass, detail + fmt_str(" (JPQ minus other); %.1f s", secs)};
}

double tail_mean(const std::vector<EpisodeMetrics>& m, std::size_t n) {
  const std::size_t start = m.size() > n ? m.size() - n : 0;
  double s = 0.0;
  for (std::size_t k = start; k < m.size(); ++k) s += m[k].reward;
  return s / static_cast<double>(m.size() - start);
}

Outcome learning_progress(const fs::path& work) {
  const auto t0 = Clock::now();
  constexpr long kEpisodes = 500;
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.policy.rule = ScriptedRule::Random;
    const double random = tail_mean(cmd::cmd_simulate(cfg, kEpisodes, work / fmt_str("random%llu", (unsigned long long)seed)), 50);
    cfg.policy.rule = ScriptedRule::NetPosition;
    const double scripted = tail_mean(cmd::cmd_simulate(cfg, kEpisodes, work / fmt_str("scripted%llu", (unsigned long long)seed)), 50);
    const auto trained = cmd::cmd_train(cfg, kEpisodes, work / fmt_str("train%llu", (unsigned long long)seed), false);
    const double learner = tail_mean(trained.metrics, 50);
    const double frac = (learner - random) / (scripted - random);
    pass &= scripted > random && frac >= 0.2;
    detail += fmt_str("seed %llu: random %.2f scripted %.2f learner %.2f (%.0f%% of gap); ",
                      (unsigned long long)seed, random, scripted, learner, 100.0 * frac);
  }
  const double secs = seconds_since(t0);
  pass &= secs < 1800.0;
  return {pass, detail + fmt_str("%.0f s", secs)};
}

Outcome determinism(const fs::path& work) {
  RunConfig cfg;
  cfg.learner.buffer_episodes = 2;
  std::vector<std::string> names;
  bool same = true;
  const auto run = [&](const fs::path& dir) {
    cmd::cmd_simulate(cfg, 5, dir / "sim");
    cmd::cmd_compare(cfg, cfg.compare, 5, dir / "cmp");
    cmd::cmd_train(cfg, 4, dir / "train", false);
    cmd::cmd_train(cfg, 2, dir / "train", true);
    cmd::cmd_export(dir / "sim" / "trajectory.jsonl", "tidy-csv", dir / "tidy.csv");
  };
  run(work / "det_a");
  run(work / "det_b");
  long files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(work / "det_a")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path other = work / "det_b" / fs::relative(entry.path(), work / "det_a");
    same &= io::read_text_file(entry.path()) == io::read_text_file(other);
  }
  return {same && files >= 5, fmt_str("%ld metric CSVs compared across reruns, %s", files,
                                      same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p2pgrid acceptance checks"};
  std::vector<int> only;
  std::string workdir = (fs::temp_directory_path() / "p2pgrid_acceptance").string();
  std::string repo = P2PGRID_SOURCE_DIR;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--workdir", workdir, "scratch directory");
  app.add_option("--repo", repo, "source tree holding configs/");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(workdir);
  fs::remove_all(work);
  fs::create_directories(work);
  const std::set<int> wanted(only.begin(), only.end());

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"budget balance", budget_balance},
      {"individual rationality", individual_rationality},
      {"JPQ hand traces", jpq_hand_traces},
      {"power balance and SoC bounds", power_balance},
      {"GAE against direct sum", gae_oracle},
      {"gradient checks", gradient_checks},
      {"PPO-clip values", ppo_values},
      {"mechanism comparison", [&] { return mechanism_comparison(repo, work); }},
      {"learning progress", [&] { return learning_progress(work); }},
      {"determinism", [&] { return determinism(work); }},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o{false, ""};
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
