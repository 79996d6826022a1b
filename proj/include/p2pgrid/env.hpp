#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p2pgrid/market.hpp"
#include "p2pgrid/microgrid.hpp"
#include "p2pgrid/money.hpp"
#include "p2pgrid/scenario.hpp"

namespace p2pgrid::env {

using market::MarketFactor;
using market::Mechanism;
using microgrid::MicrogridParams;

struct AgentConfig {
  MicrogridParams params;
  scenario::DailyProfile profile;
  std::string profile_source = "bundled";
};

struct EnvConfig {
  std::vector<AgentConfig> agents;
  scenario::PriceSchedule prices = scenario::default_price_schedule();
  Mechanism mechanism = Mechanism::Jpq;
  market::MrdaOptions mrda;
  // Market factor is 0 inside [m_lower, m_upper], -1 below, +1 above.
  double m_lower = -30.0;
  double m_upper = -20.0;
  double process_noise = 0.1;
  double observation_noise = 0.05;
  scenario::DisruptionConfig disruption;
  int horizon = scenario::kHoursPerDay;
  int window_back = 1;
  int window_ahead = 6;
  double dt = 1.0;
  bool carry_over_energy = false;

  // Throws ConfigError naming the first bad field.
  void validate() const;

  // Four-microgrid reference fleet with bundled profiles and the default price schedule.
  static EnvConfig reference();
};

// Four-microgrid reference parameters (small buyer, small seller, large buyer, large seller).
std::vector<MicrogridParams> reference_fleet();

struct AgentState {
  MicrogridParams params;
  microgrid::EssState ess;
  std::vector<double> load;           // realized
  std::vector<double> gen;            // realized, after disruption
  std::vector<double> load_forecast;  // noiseless, scaled
  std::vector<double> gen_forecast;
  std::vector<double> q_da;
};

struct GlobalState {
  int hour = 0;
  std::uint64_t seed = 0;
  std::vector<AgentState> agents;
};

struct WindowSlot {
  double q_da = 0.0;
  double load = 0.0;
  double gen = 0.0;
  double emergency = 0.0;
  bool valid = false;
};

struct Observation {
  MarketFactor m;
  double soc = 0.0;  // kWh
  std::vector<WindowSlot> window;
  double hour_sin = 0.0;
  double hour_cos = 1.0;
  int hour = 0;
};

// Normalized network input for one observation: m, soc/e_max, sin, cos, then per window slot
// (q_da/l_max, load/l_max, gen/g_max, emergency/max emergency, mask).
std::vector<double> to_features(const Observation& obs, const MicrogridParams& params,
                                const scenario::PriceSchedule& prices);
std::size_t feature_size(const EnvConfig& cfg);

struct Action {
  double price_raw = 0.0;    // [-1, 1]
  double qty_frac = 0.0;     // [0, 1]
  double reservation = 1.0;  // [0, 1]
};

struct DecodedAction {
  market::Quotation quote;
  double reservation = 1.0;
};

struct StepResult {
  int hour = 0;  // hour that was cleared
  MarketFactor m;
  std::vector<market::Quotation> quotes;
  market::TradeLedger ledger;
  std::vector<microgrid::SettlementRecord> settlements;
  std::vector<double> load;
  std::vector<double> gen;
  std::vector<double> energy;  // stored energy after settlement
  std::vector<Money> rewards;
  std::vector<Observation> observations;  // next observations
  bool done = false;

  std::vector<double> reward_values() const;
};

// Builds a fresh episode. Throws ConfigError.
GlobalState reset_state(const EnvConfig& cfg, std::uint64_t seed);

// load - gen - q_da - stored energy, summed over agents at the current hour.
double imbalance_index(const GlobalState& state);
MarketFactor market_factor_for_index(double index, double lower, double upper);
MarketFactor compute_market_factor(const GlobalState& state, const EnvConfig& cfg);

Observation build_observation(const GlobalState& state, const EnvConfig& cfg, std::size_t agent);
std::vector<Observation> build_observations(const GlobalState& state, const EnvConfig& cfg);

// Sign of price_raw picks the role (0 is a buyer); |p| = feed_in + |price_raw| * (emergency - feed_in);
// q = qty_frac * role cap. Components are clamped into the action box first.
DecodedAction decode_action(const Action& a, const GlobalState& state, const EnvConfig& cfg,
                            std::size_t agent);

// Quotation, clearing and settlement for the current hour. Throws EpisodeFinished after the
// last hour and ShapeMismatch if the action count differs from the fleet size.
StepResult step_state(GlobalState& state, const EnvConfig& cfg, std::span<const Action> actions);

// Owns a config and the evolving state.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  std::vector<Observation> reset(std::uint64_t seed);
  StepResult step(std::span<const Action> actions);

  const EnvConfig& config() const { return cfg_; }
  const GlobalState& state() const { return state_; }
  std::size_t num_agents() const { return cfg_.agents.size(); }
  bool done() const { return state_.hour >= cfg_.horizon; }
  std::vector<double> features(const Observation& obs, std::size_t agent) const;

 private:
  EnvConfig cfg_;
  GlobalState state_;
  bool has_episode_ = false;
};

}  // namespace p2pgrid::env
