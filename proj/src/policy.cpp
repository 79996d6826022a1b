#include "p2pgrid/policy.hpp"

#include <algorithm>
#include <string>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/rng.hpp"

namespace p2pgrid {

ScriptedRule parse_scripted_rule(std::string_view name) {
  if (name == "net-position") return ScriptedRule::NetPosition;
  if (name == "random") return ScriptedRule::Random;
  if (name == "zero") return ScriptedRule::Zero;
  throw ConfigError("policy: unknown scripted rule '" + std::string(name) +
                    "' (expected net-position, random or zero)");
}

std::string_view to_string(ScriptedRule rule) {
  switch (rule) {
    case ScriptedRule::NetPosition: return "net-position";
    case ScriptedRule::Random: return "random";
    case ScriptedRule::Zero: return "zero";
  }
  return "unknown";
}

std::vector<env::Action> ScriptedPolicy::act(const env::GlobalState& state, const env::EnvConfig& cfg,
                                             std::uint64_t seed, long episode) const {
  std::vector<env::Action> actions(state.agents.size());
  const auto t = static_cast<std::size_t>(state.hour);
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    env::Action& a = actions[i];
    switch (rule) {
      case ScriptedRule::Zero:
        a = {0.0, 0.0, 0.0};
        break;
      case ScriptedRule::Random: {
        Rng rng(seed, {static_cast<std::uint64_t>(Stream::Policy), static_cast<std::uint64_t>(episode),
                       i, t});
        a.price_raw = rng.uniform(-1.0, 1.0);
        a.qty_frac = rng.uniform();
        a.reservation = rng.uniform();
        break;
      }
      case ScriptedRule::NetPosition: {
        const auto& ag = state.agents[i];
        const auto& p = ag.params;
        const double net = ag.gen[t] + ag.q_da[t] - ag.load[t];
        a.reservation = 1.0;
        if (net > 0.0) {
          const double cap = microgrid::max_bid_quantity(ag.load[t], ag.gen[t], market::Role::Seller, p, cfg.dt);
          a.price_raw = -margin;
          a.qty_frac = cap > 0.0 ? std::min(1.0, net / cap) : 0.0;
        } else if (net < 0.0) {
          const double stored = std::min(p.t_discharge_max * cfg.dt, (ag.ess.energy - p.e_min) * p.eta_dis);
          const double residual = -net - std::max(0.0, stored);
          const double cap = microgrid::max_bid_quantity(ag.load[t], ag.gen[t], market::Role::Buyer, p, cfg.dt);
          a.price_raw = 1.0 - margin;
          a.qty_frac = residual > 0.0 && cap > 0.0 ? std::min(1.0, residual / cap) : 0.0;
        } else {
          a.price_raw = 0.0;
          a.qty_frac = 0.0;
        }
        break;
      }
    }
  }
  return actions;
}

}  // namespace p2pgrid
