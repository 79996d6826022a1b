#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "p2pgrid/env.hpp"
#include "p2pgrid/marl/trainer.hpp"
#include "p2pgrid/policy.hpp"

namespace p2pgrid {

// Everything a command needs, resolved and validated.
struct RunConfig {
  env::EnvConfig env = env::EnvConfig::reference();
  marl::Hyperparams learner = marl::Hyperparams::desk();
  ScriptedPolicy policy;
  std::vector<market::Mechanism> compare{market::Mechanism::Jpq, market::Mechanism::Greedy,
                                         market::Mechanism::Mrda, market::Mechanism::Vvda};
  std::uint64_t seed = 1;
  long episodes = 10;

  void validate() const;
};

using EnvOverrides = std::vector<std::pair<std::string, std::string>>;

// Full default document; every accepted key appears here.
nlohmann::json default_config_json();

nlohmann::json config_to_json(const RunConfig& cfg);
// Relative profile and price paths resolve against `base_dir`. Throws ConfigError.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");

// Applies NAME=VALUE pairs whose NAME starts with P2P_. The remainder is a key path with "__"
// between levels, matched case-insensitively (P2P_LEARNER__LR_ACTOR, P2P_FLEET__0__BETA).
// VALUE is parsed as JSON when possible and taken as a string otherwise.
void apply_env_overrides(nlohmann::json& doc, const EnvOverrides& vars);
EnvOverrides process_env_overrides();

// Defaults, then the file (if any), then P2P_* variables from the process environment.
RunConfig load_config(const std::filesystem::path& path, const EnvOverrides& vars);
RunConfig load_config(const std::filesystem::path& path);

// FNV-1a of the canonical JSON dump, hex.
std::string config_hash(const RunConfig& cfg);

}  // namespace p2pgrid
