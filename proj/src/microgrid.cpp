#include "p2pgrid/microgrid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "p2pgrid/errors.hpp"

namespace p2pgrid::microgrid {

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(std::string("microgrid.") + field + ": " + what);
}

}  // namespace

void MicrogridParams::validate() const {
  require(std::isfinite(l_max) && l_max >= 0.0, "l_max", "must be >= 0");
  require(std::isfinite(g_max) && g_max >= 0.0, "g_max", "must be >= 0");
  require(std::isfinite(e_min) && e_min >= 0.0, "e_min", "must be >= 0");
  require(std::isfinite(e_max) && e_max >= e_min, "e_max", "must be >= e_min");
  require(e0 >= e_min && e0 <= e_max, "e0", "must lie in [e_min, e_max]");
  require(t_charge_max > 0.0, "t_charge_max", "must be > 0");
  require(t_discharge_max > 0.0, "t_discharge_max", "must be > 0");
  require(eta_ch > 0.0 && eta_ch <= 1.0, "eta_ch", "must lie in (0, 1]");
  require(eta_dis > 0.0 && eta_dis <= 1.0, "eta_dis", "must lie in (0, 1]");
  require(beta > 0.0, "beta", "must be > 0");
}

SocStep soc_step(double energy, double t_ess, double dt, const MicrogridParams& params) {
  const double next = t_ess >= 0.0 ? energy + params.eta_ch * t_ess * dt
                                   : energy + t_ess * dt / params.eta_dis;
  const double clamped = std::clamp(next, params.e_min, params.e_max);
  return {clamped, clamped != next};
}

double feasible_ess_power(const EssState& state, double requested, double dt,
                          const MicrogridParams& params) {
  double p = std::clamp(requested, -params.t_discharge_max, params.t_charge_max);
  if (p > 0.0) {
    const double cap = std::min(state.reservation * params.e_max, params.e_max);
    const double headroom = std::max(0.0, cap - state.energy);
    p = std::min(p, headroom / (params.eta_ch * dt));
  } else if (p < 0.0) {
    const double available = std::max(0.0, state.energy - params.e_min);
    p = std::max(p, -available * params.eta_dis / dt);
  }
  return p;
}

double day_ahead_quantity(double load_forecast, double gen_forecast, double beta) {
  return std::max(0.0, beta * (load_forecast - gen_forecast));
}

double max_bid_quantity(double load, double gen, Role role, const MicrogridParams& params,
                        double dt) {
  if (role == Role::Buyer) return std::max(0.0, load - gen + params.t_charge_max * dt);
  return std::max(0.0, gen - load + params.t_discharge_max * dt);
}

Settlement settle_and_balance(const SettlementInput& in, const EssState& state,
                              const PriceEnvelope& prices, double dt,
                              const MicrogridParams& params) {
  SettlementRecord rec;
  rec.q_da = in.q_da;
  rec.q_b = in.q_b;
  rec.q_s = in.q_s;

  const double net = in.gen + in.q_da + in.q_b - in.load - in.q_s;
  const double cap = std::max(params.e_min, state.reservation * params.e_max);

  // 1. over-storage
  double t_over = 0.0;
  EssState after_over = state;
  if (state.energy > cap) {
    const double excess = state.energy - cap;
    t_over = -std::min(excess * params.eta_dis / dt, params.t_discharge_max);
    after_over.energy = soc_step(state.energy, t_over, dt, params).energy;
  }

  // energy available on the bus after step 1
  const double bus = net - t_over * dt;
  double t_balance = 0.0;
  if (bus > 0.0) {
    t_balance = feasible_ess_power(after_over, bus / dt, dt, params);
    t_balance = std::max(0.0, t_balance);
    rec.q_fit = std::max(0.0, bus - t_balance * dt);
  } else if (bus < 0.0) {
    MicrogridParams remaining = params;
    remaining.t_discharge_max = params.t_discharge_max + t_over;  // t_over <= 0
    if (remaining.t_discharge_max > 0.0)
      t_balance = std::min(0.0, feasible_ess_power(after_over, bus / dt, dt, remaining));
    rec.q_e = std::max(0.0, -bus + t_balance * dt);
  }

  rec.t_ess = t_over + t_balance;
  const SocStep next = soc_step(state.energy, rec.t_ess, dt, params);
  rec.profit_grid = grid_profit(rec.q_fit, rec.q_e, prices);
  rec.profit_p2p = in.p2p_profit;
  return {rec, EssState{next.energy, state.reservation}, next.clamped};
}

double balance_residual(double load, double gen, const SettlementRecord& r, double dt) {
  return (load + r.q_fit + r.q_s + r.t_ess * dt) - (gen + r.q_da + r.q_b + r.q_e);
}

Money grid_profit(double q_fit, double q_e, const PriceEnvelope& prices) {
  return Money::of(prices.feed_in, q_fit) - Money::of(prices.emergency, q_e);
}

Money p2p_profit(const market::TradeLedger& ledger, market::AgentId agent) {
  return ledger.receipts(agent) - ledger.payments(agent);
}

Money reward(const SettlementRecord& record) { return record.profit_grid + record.profit_p2p; }

}  // namespace p2pgrid::microgrid
