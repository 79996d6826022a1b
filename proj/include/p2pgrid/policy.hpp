#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "p2pgrid/env.hpp"

namespace p2pgrid {

enum class ScriptedRule { NetPosition, Random, Zero };

ScriptedRule parse_scripted_rule(std::string_view name);
std::string_view to_string(ScriptedRule rule);

// Rule-based oracle agents with access to the true state.
//   net-position: after covering a deficit from its own store, buy the rest at
//                 emergency - margin; sell any surplus at feed_in + margin; keep full reservation.
//   random:       uniform over the action box, seeded per (episode, agent, hour).
//   zero:         the all-zero action.
struct ScriptedPolicy {
  ScriptedRule rule = ScriptedRule::NetPosition;
  double margin = 0.1;  // fraction of (emergency - feed_in)

  std::vector<env::Action> act(const env::GlobalState& state, const env::EnvConfig& cfg,
                               std::uint64_t seed, long episode) const;
};

}  // namespace p2pgrid
