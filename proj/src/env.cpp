#include "p2pgrid/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/rng.hpp"

namespace p2pgrid::env {

namespace {

std::size_t hour_index(int t) { return static_cast<std::size_t>(t); }

market::PriceEnvelope envelope_at(const EnvConfig& cfg, int t) {
  return cfg.prices.envelope(t % scenario::kHoursPerDay);
}

}  // namespace

std::vector<MicrogridParams> reference_fleet() {
  struct Row {
    double l_max, g_max, e_max, t_ch, t_dis, e0;
  };
  static constexpr Row kRows[] = {
      {25, 5, 8, 4, 4, 0},
      {6, 7, 15, 5, 5, 2},
      {40, 10, 15, 8, 8, 0},
      {5, 15, 30, 10, 10, 20},
  };
  std::vector<MicrogridParams> fleet;
  for (const auto& r : kRows) {
    MicrogridParams p;
    p.l_max = r.l_max;
    p.g_max = r.g_max;
    p.e_max = r.e_max;
    p.e_min = 0.0;
    p.t_charge_max = r.t_ch;
    p.t_discharge_max = r.t_dis;
    p.eta_ch = 1.0;
    p.eta_dis = 1.0;
    p.e0 = r.e0;
    p.beta = 0.95;
    fleet.push_back(p);
  }
  return fleet;
}

EnvConfig EnvConfig::reference() {
  EnvConfig cfg;
  const auto fleet = reference_fleet();
  for (std::size_t i = 0; i < fleet.size(); ++i)
    cfg.agents.push_back({fleet[i], scenario::bundled_profile(i), "bundled:" + std::to_string(i)});
  return cfg;
}

void EnvConfig::validate() const {
  if (agents.empty()) throw ConfigError("fleet: at least one microgrid is required");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    try {
      agents[i].params.validate();
      agents[i].profile.validate();
    } catch (const Error& e) {
      throw ConfigError("fleet[" + std::to_string(i) + "]: " + e.what());
    }
  }
  prices.validate();
  disruption.validate();
  if (!(m_lower <= m_upper)) throw ConfigError("market_factor: lower must be <= upper");
  if (!(process_noise >= 0.0)) throw ConfigError("noise.process: must be >= 0");
  if (!(observation_noise >= 0.0)) throw ConfigError("noise.observation: must be >= 0");
  if (horizon < 1) throw ConfigError("horizon: must be >= 1");
  if (window_back < 0 || window_ahead < 0) throw ConfigError("window: offsets must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("dt: must be > 0");
  if (mrda.rounds < 1) throw ConfigError("mrda.rounds: must be >= 1");
  if (!(mrda.concession >= 0.0 && mrda.concession < 1.0))
    throw ConfigError("mrda.concession: must lie in [0, 1)");
}

std::size_t feature_size(const EnvConfig& cfg) {
  return 4 + 5 * static_cast<std::size_t>(cfg.window_back + cfg.window_ahead + 1);
}

std::vector<double> to_features(const Observation& obs, const MicrogridParams& params,
                                const scenario::PriceSchedule& prices) {
  const double e_peak = *std::max_element(prices.emergency.begin(), prices.emergency.end());
  const auto safe = [](double v) { return v > 0.0 ? v : 1.0; };
  std::vector<double> f;
  f.reserve(4 + 5 * obs.window.size());
  f.push_back(static_cast<double>(obs.m.value()));
  f.push_back(obs.soc / safe(params.e_max));
  f.push_back(obs.hour_sin);
  f.push_back(obs.hour_cos);
  for (const auto& s : obs.window) {
    f.push_back(s.q_da / safe(params.l_max));
    f.push_back(s.load / safe(params.l_max));
    f.push_back(s.gen / safe(params.g_max));
    f.push_back(s.emergency / safe(e_peak));
    f.push_back(s.valid ? 1.0 : 0.0);
  }
  return f;
}

GlobalState reset_state(const EnvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  GlobalState st;
  st.hour = 0;
  st.seed = seed;
  const int T = cfg.horizon;
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    const auto& ac = cfg.agents[i];
    AgentState a;
    a.params = ac.params;
    a.ess = {ac.params.e0, 1.0};
    const auto real = scenario::sample_realization(ac.profile, ac.params, cfg.process_noise, seed, i, T);
    a.load = real.load;
    a.gen = scenario::apply_pv_disruption(real.gen, cfg.disruption, seed, i);
    a.load_forecast.resize(hour_index(T));
    a.gen_forecast.resize(hour_index(T));
    a.q_da.resize(hour_index(T));
    for (int t = 0; t < T; ++t) {
      const std::size_t h = hour_index(t % scenario::kHoursPerDay);
      a.load_forecast[t] = ac.params.l_max * ac.profile.load[h];
      a.gen_forecast[t] = ac.params.g_max * ac.profile.pv[h];
      a.q_da[t] = microgrid::day_ahead_quantity(a.load_forecast[t], a.gen_forecast[t], ac.params.beta);
    }
    st.agents.push_back(std::move(a));
  }
  return st;
}

double imbalance_index(const GlobalState& state) {
  const std::size_t t = hour_index(state.hour);
  double index = 0.0;
  for (const auto& a : state.agents) index += a.load[t] - a.gen[t] - a.q_da[t] - a.ess.energy;
  return index;
}

MarketFactor market_factor_for_index(double index, double lower, double upper) {
  if (index < lower) return MarketFactor::surplus();
  if (index <= upper) return MarketFactor::balanced();
  return MarketFactor::deficit();
}

MarketFactor compute_market_factor(const GlobalState& state, const EnvConfig& cfg) {
  if (state.hour >= cfg.horizon) return MarketFactor::balanced();
  return market_factor_for_index(imbalance_index(state), cfg.m_lower, cfg.m_upper);
}

Observation build_observation(const GlobalState& state, const EnvConfig& cfg, std::size_t agent) {
  const AgentState& a = state.agents.at(agent);
  const int t = state.hour;
  Observation obs;
  obs.m = compute_market_factor(state, cfg);
  obs.soc = a.ess.energy;
  obs.hour = t;
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % scenario::kHoursPerDay) /
                       scenario::kHoursPerDay;
  obs.hour_sin = std::sin(phase);
  obs.hour_cos = std::cos(phase);
  for (int z = t - cfg.window_back; z <= t + cfg.window_ahead; ++z) {
    WindowSlot slot;
    if (z >= 0 && z < cfg.horizon) {
      const std::size_t zi = hour_index(z);
      slot.valid = true;
      slot.q_da = a.q_da[zi];
      slot.emergency = envelope_at(cfg, z).emergency;
      // history is measured, the current hour and beyond are forecasts
      const bool past = z < t;
      slot.load = past ? a.load[zi] : a.load_forecast[zi];
      slot.gen = past ? a.gen[zi] : a.gen_forecast[zi];
      if (cfg.observation_noise > 0.0) {
        Rng rng(state.seed, {agent, static_cast<std::uint64_t>(Stream::Observation),
                             static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(z)});
        const double nl = rng.normal();
        const double ng = rng.normal();
        slot.load = std::max(0.0, slot.load + cfg.observation_noise * slot.load * nl);
        slot.gen = std::max(0.0, slot.gen + cfg.observation_noise * slot.gen * ng);
      }
    }
    obs.window.push_back(slot);
  }
  return obs;
}

std::vector<Observation> build_observations(const GlobalState& state, const EnvConfig& cfg) {
  std::vector<Observation> out;
  out.reserve(state.agents.size());
  for (std::size_t i = 0; i < state.agents.size(); ++i) out.push_back(build_observation(state, cfg, i));
  return out;
}

DecodedAction decode_action(const Action& a, const GlobalState& state, const EnvConfig& cfg,
                            std::size_t agent) {
  const AgentState& ag = state.agents.at(agent);
  const std::size_t t = hour_index(state.hour);
  const auto env = envelope_at(cfg, state.hour);
  const auto finite_or = [](double v, double fallback) { return std::isfinite(v) ? v : fallback; };
  const double price_raw = std::clamp(finite_or(a.price_raw, 0.0), -1.0, 1.0);
  const double qty_frac = std::clamp(finite_or(a.qty_frac, 0.0), 0.0, 1.0);
  const double reservation = std::clamp(finite_or(a.reservation, 1.0), 0.0, 1.0);

  const market::Role role = price_raw < 0.0 ? market::Role::Seller : market::Role::Buyer;
  // min() keeps the upper envelope edge exact under rounding
  const double magnitude =
      std::min(env.emergency, env.feed_in + std::abs(price_raw) * (env.emergency - env.feed_in));
  const double cap = microgrid::max_bid_quantity(ag.load[t], ag.gen[t], role, ag.params, cfg.dt);

  DecodedAction d;
  d.quote.agent = agent;
  d.quote.price = role == market::Role::Seller ? -magnitude : magnitude;
  d.quote.quantity = qty_frac * cap;
  d.reservation = reservation;
  return d;
}

std::vector<double> StepResult::reward_values() const {
  std::vector<double> out;
  out.reserve(rewards.size());
  for (const auto& r : rewards) out.push_back(r.to_double());
  return out;
}

StepResult step_state(GlobalState& state, const EnvConfig& cfg, std::span<const Action> actions) {
  if (state.hour >= cfg.horizon) throw EpisodeFinished();
  if (actions.size() != state.agents.size())
    throw ShapeMismatch("step: expected " + std::to_string(state.agents.size()) + " actions, got " +
                        std::to_string(actions.size()));
  const int t = state.hour;
  const std::size_t ti = hour_index(t);
  const auto envelope = envelope_at(cfg, t);

  StepResult res;
  res.hour = t;
  res.m = compute_market_factor(state, cfg);

  std::vector<double> reservations;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const DecodedAction d = decode_action(actions[i], state, cfg, i);
    if (market::validate_quotation(d.quote, envelope) != market::ValidationResult::Accepted)
      throw Error("decoded quotation violates the price envelope");
    res.quotes.push_back(d.quote);
    reservations.push_back(d.reservation);
  }

  res.ledger = market::clear(cfg.mechanism, res.quotes, {res.m, envelope, cfg.mrda});

  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    AgentState& a = state.agents[i];
    a.ess.reservation = reservations[i];
    microgrid::SettlementInput in;
    in.load = a.load[ti];
    in.gen = a.gen[ti];
    in.q_da = a.q_da[ti];
    in.q_b = res.ledger.bought(i);
    in.q_s = res.ledger.sold(i);
    in.p2p_profit = microgrid::p2p_profit(res.ledger, i);
    const auto s = microgrid::settle_and_balance(in, a.ess, envelope, cfg.dt, a.params);
    a.ess = s.state;
    res.settlements.push_back(s.record);
    res.load.push_back(in.load);
    res.gen.push_back(in.gen);
    res.energy.push_back(a.ess.energy);
    res.rewards.push_back(microgrid::reward(s.record));
  }

  state.hour += 1;
  res.done = state.hour >= cfg.horizon;
  res.observations = build_observations(state, cfg);
  return res;
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<Observation> Environment::reset(std::uint64_t seed) {
  GlobalState next = reset_state(cfg_, seed);
  if (cfg_.carry_over_energy && has_episode_) {
    for (std::size_t i = 0; i < next.agents.size(); ++i) next.agents[i].ess.energy = state_.agents[i].ess.energy;
  }
  state_ = std::move(next);
  has_episode_ = true;
  return build_observations(state_, cfg_);
}

StepResult Environment::step(std::span<const Action> actions) {
  if (!has_episode_) throw EpisodeFinished();
  return step_state(state_, cfg_, actions);
}

std::vector<double> Environment::features(const Observation& obs, std::size_t agent) const {
  return to_features(obs, cfg_.agents.at(agent).params, cfg_.prices);
}

}  // namespace p2pgrid::env
