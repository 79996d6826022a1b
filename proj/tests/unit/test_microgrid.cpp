#include <gtest/gtest.h>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/microgrid.hpp"
#include "p2pgrid/rng.hpp"

namespace p2pgrid::microgrid {
namespace {

MicrogridParams params(double e_max = 8, double rate = 4) {
  MicrogridParams p;
  p.l_max = 25;
  p.g_max = 5;
  p.e_max = e_max;
  p.t_charge_max = rate;
  p.t_discharge_max = rate;
  return p;
}

const market::PriceEnvelope kPrices{0.2, 1.0, 2.0};

TEST(Params, Validation) {
  EXPECT_NO_THROW(params().validate());
  auto p = params();
  p.e0 = 9;
  EXPECT_THROW(p.validate(), ConfigError);
  p = params();
  p.eta_dis = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = params();
  p.t_charge_max = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = params();
  p.beta = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(SocStep, Examples) {
  auto p = params(10);
  EXPECT_DOUBLE_EQ(soc_step(5, 2, 1, p).energy, 7);
  EXPECT_DOUBLE_EQ(soc_step(5, 0, 1, p).energy, 5);
  p.eta_dis = 0.9;
  EXPECT_NEAR(soc_step(5, -2, 1, p).energy, 5 - 2 / 0.9, 1e-12);
  EXPECT_FALSE(soc_step(5, -2, 1, p).clamped);
}

TEST(SocStep, ClampsAndReports) {
  const auto p = params(8);
  const auto up = soc_step(7, 4, 1, p);
  EXPECT_DOUBLE_EQ(up.energy, 8);
  EXPECT_TRUE(up.clamped);
  const auto down = soc_step(1, -4, 1, p);
  EXPECT_DOUBLE_EQ(down.energy, 0);
  EXPECT_TRUE(down.clamped);
}

TEST(FeasibleEssPower, Examples) {
  const auto p = params(8, 4);
  EXPECT_DOUBLE_EQ(feasible_ess_power({7.5, 1.0}, 4, 1, p), 0.5);
  EXPECT_DOUBLE_EQ(feasible_ess_power({0, 1.0}, -3, 1, p), 0.0);
  EXPECT_DOUBLE_EQ(feasible_ess_power({4, 0.5}, 2, 1, p), 0.0);
  EXPECT_DOUBLE_EQ(feasible_ess_power({4, 1.0}, -9, 1, p), -4.0);
}

TEST(DayAheadQuantity, Examples) {
  EXPECT_NEAR(day_ahead_quantity(10, 4, 0.95), 5.7, 1e-12);
  EXPECT_DOUBLE_EQ(day_ahead_quantity(4, 10, 0.95), 0.0);
  EXPECT_DOUBLE_EQ(day_ahead_quantity(6, 6, 0.7), 0.0);
  EXPECT_LE(day_ahead_quantity(10, 4, 0.5), day_ahead_quantity(10, 4, 0.9));
}

TEST(MaxBidQuantity, Examples) {
  auto p = params(8, 4);
  EXPECT_DOUBLE_EQ(max_bid_quantity(10, 3, market::Role::Buyer, p), 11);
  EXPECT_DOUBLE_EQ(max_bid_quantity(10, 3, market::Role::Seller, p), 0);
  p.t_discharge_max = 5;
  EXPECT_DOUBLE_EQ(max_bid_quantity(2, 7, market::Role::Seller, p), 10);
}

TEST(Settle, FullAbsorption) {
  const auto p = params(8, 4);
  // net = gen + q_da + q_b - load - q_s = +3, headroom 5
  const auto s = settle_and_balance({1, 4, 0, 0, 0, {}}, {3, 1.0}, kPrices, 1, p);
  EXPECT_DOUBLE_EQ(s.record.t_ess, 3);
  EXPECT_DOUBLE_EQ(s.record.q_fit, 0);
  EXPECT_DOUBLE_EQ(s.record.q_e, 0);
  EXPECT_DOUBLE_EQ(s.state.energy, 6);
}

TEST(Settle, EmptyStoreBuysEmergency) {
  const auto p = params(8, 4);
  const auto s = settle_and_balance({5, 3, 0, 0, 0, {}}, {0, 1.0}, kPrices, 1, p);
  EXPECT_DOUBLE_EQ(s.record.q_e, 2);
  EXPECT_DOUBLE_EQ(s.record.t_ess, 0);
  EXPECT_EQ(s.record.profit_grid, Money::from_double(-4.0));
}

TEST(Settle, OverStorageDischarge) {
  const auto p = params(8, 10);
  const auto s = settle_and_balance({2, 2, 0, 0, 0, {}}, {6, 0.5}, kPrices, 1, p);
  EXPECT_DOUBLE_EQ(s.record.q_fit, 2);
  EXPECT_DOUBLE_EQ(s.record.t_ess, -2);
  EXPECT_DOUBLE_EQ(s.state.energy, 4);
}

TEST(Settle, FuzzedBalanceAndBounds) {
  Rng rng(99, {1});
  for (int k = 0; k < 20000; ++k) {
    MicrogridParams p;
    p.l_max = 40;
    p.g_max = 15;
    p.e_max = rng.uniform(1, 30);
    p.e_min = rng.uniform(0, 0.3) * p.e_max;
    p.t_charge_max = rng.uniform(0.5, 10);
    p.t_discharge_max = rng.uniform(0.5, 10);
    p.eta_ch = rng.uniform(0.7, 1.0);
    p.eta_dis = rng.uniform(0.7, 1.0);
    const EssState st{rng.uniform(p.e_min, p.e_max), rng.uniform()};
    const SettlementInput in{rng.uniform(0, 40), rng.uniform(0, 15), rng.uniform(0, 10), rng.uniform(0, 5),
                             rng.uniform(0, 5), {}};
    const auto s = settle_and_balance(in, st, kPrices, 1, p);
    EXPECT_NEAR(balance_residual(in.load, in.gen, s.record, 1), 0.0, 1e-9);
    EXPECT_GE(s.state.energy, p.e_min - 1e-12);
    EXPECT_LE(s.state.energy, p.e_max + 1e-12);
    EXPECT_GE(s.record.q_e, 0);
    EXPECT_GE(s.record.q_fit, 0);
    EXPECT_LE(s.record.t_ess, p.t_charge_max + 1e-12);
    EXPECT_GE(s.record.t_ess, -p.t_discharge_max - 1e-12);
    // The cap is enforced whenever the rate allowed reaching it.
    const double cap = std::max(p.e_min, st.reservation * p.e_max);
    if (st.energy - cap <= p.t_discharge_max * p.eta_dis) EXPECT_LE(s.state.energy, std::max(cap, st.energy) + 1e-9);
  }
}

TEST(GridProfit, Examples) {
  const market::PriceEnvelope env{0.2, 1.0, 2.0};
  EXPECT_EQ(grid_profit(2, 1, env), Money::from_double(-1.6));
  EXPECT_EQ(grid_profit(0, 0, env), Money());
  EXPECT_EQ(grid_profit(5, 0, env), Money::from_double(1.0));
  EXPECT_LT(grid_profit(1, 2, env), grid_profit(1, 1, env));
  EXPECT_GT(grid_profit(2, 1, env), grid_profit(1, 1, env));
}

TEST(P2pProfit, Examples) {
  const std::vector<market::Quotation> q{{1, 1.0, 5}, {2, 0.8, 3}, {3, -0.5, 4}, {4, -0.9, 6}};
  const auto ledger = market::clear_jpq(q, market::MarketFactor::balanced(), 2.0);
  EXPECT_EQ(p2p_profit(ledger, 9), Money());
  EXPECT_EQ(p2p_profit(ledger, 1), Money::from_double(-3.0));
  EXPECT_EQ(p2p_profit(ledger, 3), Money::from_double(3.0));
  EXPECT_EQ(p2p_profit(ledger, 1) + p2p_profit(ledger, 3), Money());
}

TEST(Reward, SumOfProfits) {
  SettlementRecord r;
  r.profit_grid = Money::from_double(-1.6);
  r.profit_p2p = Money::from_double(3.0);
  EXPECT_EQ(reward(r), Money::from_double(1.4));
  EXPECT_EQ(reward(SettlementRecord{}), Money());
}

}  // namespace
}  // namespace p2pgrid::microgrid
