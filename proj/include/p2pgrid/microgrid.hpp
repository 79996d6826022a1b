#pragma once

#include "p2pgrid/market.hpp"
#include "p2pgrid/money.hpp"

namespace p2pgrid::microgrid {

using market::PriceEnvelope;
using market::Role;

struct MicrogridParams {
  double l_max = 0.0;            // kWh, peak load
  double g_max = 0.0;            // kWh, peak PV generation
  double e_max = 0.0;            // kWh, storage capacity
  double e_min = 0.0;            // kWh
  double t_charge_max = 0.0;     // kW
  double t_discharge_max = 0.0;  // kW, magnitude of the most negative rate
  double eta_ch = 1.0;
  double eta_dis = 1.0;
  double e0 = 0.0;   // kWh at episode start
  double beta = 0.95;

  // Throws ConfigError naming the violated field.
  void validate() const;
};

struct EssState {
  double energy = 0.0;       // kWh
  double reservation = 1.0;  // alpha, usable fraction of e_max
};

struct SocStep {
  double energy = 0.0;
  bool clamped = false;
};

// Energy-domain state-of-charge update for signed power (charge > 0). The result is clamped
// to [e_min, e_max] and the clamp is reported.
SocStep soc_step(double energy, double t_ess, double dt, const MicrogridParams& params);

// Clamps `requested` so that rate limits hold and the post-step energy stays within
// [e_min, reservation * e_max]. Returns the feasible signed power.
double feasible_ess_power(const EssState& state, double requested, double dt,
                          const MicrogridParams& params);

// max(0, beta * (load_forecast - gen_forecast))
double day_ahead_quantity(double load_forecast, double gen_forecast, double beta);

// Physical bid cap for the role: buyers max(0, L - G + T_ch*dt), sellers max(0, G - L + T_dis*dt).
double max_bid_quantity(double load, double gen, Role role, const MicrogridParams& params,
                        double dt = 1.0);

struct SettlementRecord {
  double q_da = 0.0;
  double q_b = 0.0;
  double q_s = 0.0;
  double q_e = 0.0;
  double q_fit = 0.0;
  double t_ess = 0.0;  // kW, charge positive
  Money profit_grid;
  Money profit_p2p;
};

struct SettlementInput {
  double load = 0.0;
  double gen = 0.0;
  double q_da = 0.0;
  double q_b = 0.0;
  double q_s = 0.0;
  Money p2p_profit;  // passed through to the record
};

struct Settlement {
  SettlementRecord record;
  EssState state;
  bool clamped = false;
};

// Post-clearing recourse. With net = gen + q_da + q_b - load - q_s:
//   1. energy above reservation * e_max is discharged (rate limited) and exported;
//   2. a positive net charges the store up to the reservation cap, the rest is fed in;
//   3. a negative net discharges the store down to e_min, the rest is bought at emergency.
// The power balance load + q_fit + q_s + t_ess*dt = gen + q_da + q_b + q_e holds on output.
Settlement settle_and_balance(const SettlementInput& in, const EssState& state,
                              const PriceEnvelope& prices, double dt,
                              const MicrogridParams& params);

// load + q_fit + q_s + t_ess*dt - (gen + q_da + q_b + q_e)
double balance_residual(double load, double gen, const SettlementRecord& r, double dt);

// feed_in * q_fit - emergency * q_e
Money grid_profit(double q_fit, double q_e, const PriceEnvelope& prices);

// Seller receipts minus buyer payments for `agent`.
Money p2p_profit(const market::TradeLedger& ledger, market::AgentId agent);

Money reward(const SettlementRecord& record);

}  // namespace p2pgrid::microgrid
