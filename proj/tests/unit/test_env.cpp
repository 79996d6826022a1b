#include <gtest/gtest.h>

#include "p2pgrid/env.hpp"
#include "p2pgrid/errors.hpp"
#include "p2pgrid/rng.hpp"

namespace p2pgrid::env {
namespace {

EnvConfig quiet_reference() {
  EnvConfig cfg = EnvConfig::reference();
  cfg.process_noise = 0.0;
  cfg.observation_noise = 0.0;
  cfg.disruption = scenario::DisruptionConfig::none();
  return cfg;
}

std::vector<Action> random_actions(Rng& rng, std::size_t n) {
  std::vector<Action> a(n);
  for (auto& x : a) x = {rng.uniform(-1, 1), rng.uniform(), rng.uniform()};
  return a;
}

TEST(Reset, ReferenceFleetInitialEnergy) {
  Environment env(EnvConfig::reference());
  const auto obs = env.reset(7);
  ASSERT_EQ(env.num_agents(), 4u);
  ASSERT_EQ(obs.size(), 4u);
  const double e0[] = {0, 2, 0, 20};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(env.state().agents[i].ess.energy, e0[i]);
    EXPECT_DOUBLE_EQ(obs[i].soc, e0[i]);
  }
  EXPECT_EQ(env.state().hour, 0);
}

TEST(Reset, SameSeedSameState) {
  const auto cfg = EnvConfig::reference();
  const auto a = reset_state(cfg, 11);
  const auto b = reset_state(cfg, 11);
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    EXPECT_EQ(a.agents[i].load, b.agents[i].load);
    EXPECT_EQ(a.agents[i].gen, b.agents[i].gen);
    EXPECT_EQ(a.agents[i].q_da, b.agents[i].q_da);
  }
  EXPECT_NE(reset_state(cfg, 12).agents[0].load, a.agents[0].load);
}

TEST(Reset, DayAheadPositiveUnderDeficit) {
  EnvConfig cfg = EnvConfig::reference();
  // A Grid 3 site whose forecast load exceeds PV at every hour.
  auto& g3 = cfg.agents[2];
  for (int h = 0; h < 24; ++h) g3.profile.load[h] = 0.3 + 0.7 * g3.profile.load[h];
  const auto st = reset_state(cfg, 1);
  for (int t = 0; t < 24; ++t) {
    ASSERT_GT(st.agents[2].load_forecast[t], st.agents[2].gen_forecast[t]);
    EXPECT_GT(st.agents[2].q_da[t], 0.0) << t;
  }
  // On the bundled fleet q_da is positive exactly where the forecast shows a deficit.
  const auto ref = reset_state(EnvConfig::reference(), 1);
  for (const auto& a : ref.agents)
    for (int t = 0; t < 24; ++t) EXPECT_EQ(a.q_da[t] > 0.0, a.load_forecast[t] > a.gen_forecast[t]);
}

TEST(Reset, InvalidConfig) {
  EnvConfig cfg = EnvConfig::reference();
  cfg.agents[1].params.e0 = 100;
  EXPECT_THROW(Environment{cfg}, ConfigError);
  cfg = EnvConfig::reference();
  cfg.prices.feed_in = 5.0;
  EXPECT_THROW(reset_state(cfg, 1), ConfigError);
}

TEST(MarketFactor, Rule) {
  GlobalState st;
  AgentState a;
  a.load = {50};
  a.gen = {20};
  a.q_da = {25};
  a.ess.energy = 30;
  st.agents.push_back(a);
  EXPECT_DOUBLE_EQ(imbalance_index(st), -25);
  EXPECT_EQ(market_factor_for_index(-25, -30, -20), MarketFactor::balanced());
  EXPECT_EQ(market_factor_for_index(-40, -30, -20), MarketFactor::surplus());
  EXPECT_EQ(market_factor_for_index(0, -30, -20), MarketFactor::deficit());
  EXPECT_EQ(market_factor_for_index(-30, -30, -20), MarketFactor::balanced());
  EXPECT_EQ(market_factor_for_index(-20, -30, -20), MarketFactor::balanced());
}

TEST(Observation, WindowShapeAndPadding) {
  const auto cfg = EnvConfig::reference();
  const auto st = reset_state(cfg, 3);
  const auto obs = build_observation(st, cfg, 0);
  ASSERT_EQ(obs.window.size(), 8u);
  EXPECT_FALSE(obs.window[0].valid);
  EXPECT_EQ(obs.window[0].load, 0.0);
  EXPECT_TRUE(obs.window[1].valid);
  EXPECT_DOUBLE_EQ(obs.hour_sin, 0.0);
  EXPECT_DOUBLE_EQ(obs.hour_cos, 1.0);
  EXPECT_EQ(to_features(obs, cfg.agents[0].params, cfg.prices).size(), feature_size(cfg));
  EXPECT_EQ(feature_size(cfg), 44u);
}

TEST(Observation, NoiselessWindowIsGroundTruth) {
  const auto cfg = quiet_reference();
  GlobalState st = reset_state(cfg, 5);
  st.hour = 10;
  const auto obs = build_observation(st, cfg, 3);
  for (int k = 0; k < 8; ++k) {
    const std::size_t z = static_cast<std::size_t>(10 - 1 + k);
    EXPECT_DOUBLE_EQ(obs.window[k].load, st.agents[3].load_forecast[z]);
    EXPECT_DOUBLE_EQ(obs.window[k].gen, st.agents[3].gen_forecast[z]);
    EXPECT_DOUBLE_EQ(obs.window[k].q_da, st.agents[3].q_da[z]);
    EXPECT_DOUBLE_EQ(obs.window[k].emergency, cfg.prices.emergency[z]);
  }
}

TEST(Observation, NoiseOnlyTouchesLoadAndGen) {
  auto cfg = quiet_reference();
  cfg.observation_noise = 0.2;
  GlobalState st = reset_state(cfg, 5);
  st.hour = 12;
  const auto obs = build_observation(st, cfg, 2);
  bool differs = false;
  for (int k = 0; k < 8; ++k) {
    const std::size_t z = static_cast<std::size_t>(11 + k);
    EXPECT_DOUBLE_EQ(obs.window[k].q_da, st.agents[2].q_da[z]);
    differs = differs || obs.window[k].load != st.agents[2].load_forecast[z];
  }
  EXPECT_TRUE(differs);
}

TEST(DecodeAction, Examples) {
  EnvConfig cfg = quiet_reference();
  cfg.prices = scenario::flat_price_schedule(0.2, 1.0, 2.2);
  const auto st = reset_state(cfg, 1);
  const auto buyer = decode_action({0.5, 1.0, 1.0}, st, cfg, 0);
  EXPECT_EQ(buyer.quote.role(), market::Role::Buyer);
  EXPECT_NEAR(buyer.quote.price, 1.2, 1e-12);
  const auto seller = decode_action({-1.0, 0.5, 0.3}, st, cfg, 0);
  EXPECT_DOUBLE_EQ(seller.quote.price, -2.2);
  EXPECT_DOUBLE_EQ(seller.reservation, 0.3);
  const auto zero = decode_action({0.0, 0.0, 1.0}, st, cfg, 0);
  EXPECT_DOUBLE_EQ(zero.quote.price, 0.2);
  EXPECT_DOUBLE_EQ(zero.quote.quantity, 0.0);
  EXPECT_TRUE(market::partition(std::vector<market::Quotation>{zero.quote}).buyers.empty());
}

TEST(DecodeAction, AnyBoxActionIsValid) {
  const auto cfg = EnvConfig::reference();
  GlobalState st = reset_state(cfg, 2);
  Rng rng(5, {0});
  for (int k = 0; k < 100000; ++k) {
    st.hour = static_cast<int>(rng.index(24));
    const std::size_t i = rng.index(4);
    const Action a{rng.uniform(-1, 1), rng.uniform(), rng.uniform()};
    const auto d = decode_action(a, st, cfg, i);
    ASSERT_EQ(market::validate_quotation(d.quote, cfg.prices.envelope(st.hour)), market::ValidationResult::Accepted);
    const auto& ag = st.agents[i];
    const auto t = static_cast<std::size_t>(st.hour);
    ASSERT_LE(d.quote.quantity, microgrid::max_bid_quantity(ag.load[t], ag.gen[t], d.quote.role(), ag.params) + 1e-12);
  }
}

TEST(Step, NoTradeStep) {
  Environment env(EnvConfig::reference());
  env.reset(1);
  const std::vector<Action> idle(4, Action{0.3, 0.0, 1.0});
  const auto r = env.step(idle);
  EXPECT_TRUE(r.ledger.empty());
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(r.settlements[i].q_b, 0.0);
    EXPECT_NEAR(microgrid::balance_residual(r.load[i], r.gen[i], r.settlements[i], 1), 0.0, 1e-9);
  }
}

TEST(Step, ComplementaryPairTrades) {
  EnvConfig cfg;
  cfg.process_noise = 0.0;
  cfg.observation_noise = 0.0;
  cfg.disruption = scenario::DisruptionConfig::none();
  cfg.prices = scenario::flat_price_schedule(0.2, 1.0, 2.0);
  microgrid::MicrogridParams seller;
  seller.l_max = 10;
  seller.g_max = 10;
  seller.e_max = 10;
  seller.t_charge_max = 5;
  seller.t_discharge_max = 5;
  microgrid::MicrogridParams buyer = seller;
  buyer.l_max = 100;
  scenario::DailyProfile sp, bp;
  sp.load.fill(0.0);
  sp.pv.fill(0.5);  // 5 kWh surplus
  bp.load.fill(1.0);
  bp.pv.fill(0.0);  // 100 kWh load, 95 covered day-ahead
  cfg.agents = {{seller, sp, "test"}, {buyer, bp, "test"}};
  Environment env(cfg);
  env.reset(3);
  const double buyer_cap = microgrid::max_bid_quantity(100, 0, market::Role::Buyer, buyer);
  const std::vector<Action> acts{{-1e-12, 0.5, 1.0}, {1.0, 5.0 / buyer_cap, 1.0}};
  const auto r = env.step(acts);
  ASSERT_EQ(r.ledger.fills().size(), 1u);
  EXPECT_NEAR(r.ledger.fills()[0].kwh, 5.0, 1e-9);
  EXPECT_NEAR(r.ledger.fills()[0].buyer_price, 1.1, 1e-9);
  EXPECT_NEAR(r.settlements[1].q_e, 0.0, 1e-9);
  EXPECT_NEAR(r.settlements[0].q_fit, 0.0, 1e-9);
}

TEST(Step, BalanceBoundsAndWelfareAcrossMechanisms) {
  for (auto mech : {Mechanism::Jpq, Mechanism::Greedy, Mechanism::Mrda, Mechanism::Vvda}) {
    EnvConfig cfg = EnvConfig::reference();
    cfg.mechanism = mech;
    cfg.disruption = scenario::DisruptionConfig::published();
    Environment env(cfg);
    Rng rng(8, {static_cast<std::uint64_t>(mech)});
    for (int ep = 0; ep < 5; ++ep) {
      env.reset(static_cast<std::uint64_t>(ep));
      while (!env.done()) {
        const auto r = env.step(random_actions(rng, 4));
        Money rewards, grid;
        for (std::size_t i = 0; i < 4; ++i) {
          const auto& p = cfg.agents[i].params;
          EXPECT_NEAR(microgrid::balance_residual(r.load[i], r.gen[i], r.settlements[i], 1), 0.0, 1e-9);
          EXPECT_GE(r.energy[i], p.e_min);
          EXPECT_LE(r.energy[i], p.e_max);
          rewards += r.rewards[i];
          grid += r.settlements[i].profit_grid;
        }
        EXPECT_EQ(rewards, grid - r.ledger.operator_surplus());
      }
    }
  }
}

TEST(Step, EpisodeLengthAndErrors) {
  Environment env(EnvConfig::reference());
  const std::vector<Action> acts(4);
  EXPECT_THROW(env.step(acts), EpisodeFinished);
  env.reset(1);
  int steps = 0;
  while (!env.done()) {
    const auto r = env.step(acts);
    ++steps;
    EXPECT_EQ(r.done, steps == 24);
  }
  EXPECT_EQ(steps, 24);
  EXPECT_THROW(env.step(acts), EpisodeFinished);
  env.reset(2);
  EXPECT_THROW(env.step(std::vector<Action>(3)), ShapeMismatch);
}

TEST(Step, Deterministic) {
  const auto run = [] {
    Environment env(EnvConfig::reference());
    env.reset(42);
    Rng rng(1, {2});
    std::vector<double> trace;
    while (!env.done()) {
      const auto r = env.step(random_actions(rng, 4));
      for (double v : r.reward_values()) trace.push_back(v);
      for (double v : r.energy) trace.push_back(v);
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(Environment, CarryOverEnergy) {
  EnvConfig cfg = EnvConfig::reference();
  cfg.carry_over_energy = true;
  Environment env(cfg);
  env.reset(1);
  while (!env.done()) env.step(std::vector<Action>(4, Action{0.0, 0.0, 1.0}));
  const double end = env.state().agents[3].ess.energy;
  env.reset(2);
  EXPECT_DOUBLE_EQ(env.state().agents[3].ess.energy, end);
}

}  // namespace
}  // namespace p2pgrid::env
