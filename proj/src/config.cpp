#include "p2pgrid/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/hash.hpp"

extern char** environ;

namespace p2pgrid {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kPrefix = "P2P_";

json params_to_json(const microgrid::MicrogridParams& p) {
  return {{"l_max", p.l_max},
          {"g_max", p.g_max},
          {"e_max", p.e_max},
          {"e_min", p.e_min},
          {"t_charge_max", p.t_charge_max},
          {"t_discharge_max", p.t_discharge_max},
          {"eta_ch", p.eta_ch},
          {"eta_dis", p.eta_dis},
          {"e0", p.e0},
          {"beta", p.beta}};
}

json learner_to_json(const marl::Hyperparams& hp) {
  return {{"gamma", hp.gamma},
          {"lambda", hp.lambda},
          {"clip_eps", hp.clip_eps},
          {"entropy_coef", hp.entropy_coef},
          {"lr_actor", hp.lr_actor},
          {"lr_critic", hp.lr_critic},
          {"epochs", hp.epochs},
          {"minibatch", hp.minibatch},
          {"episodes", hp.episodes},
          {"buffer_episodes", hp.buffer_episodes},
          {"max_grad_norm", hp.max_grad_norm},
          {"optimizer", hp.optimizer == marl::OptimizerKind::Adam ? "adam" : "sgd"},
          {"reward_scale", hp.reward_scale},
          {"lstm_hidden", hp.lstm_hidden},
          {"actor_hidden", hp.actor_hidden},
          {"critic_hidden", hp.critic_hidden}};
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Rejects keys that are absent from the reference document.
void check_keys(const json& doc, const json& reference, const std::string& where) {
  if (!doc.is_object() || !reference.is_object()) return;
  for (const auto& [key, value] : doc.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw ConfigError(path + ": unknown key");
    check_keys(value, reference.at(key), path);
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": missing or wrong type");
  }
}

scenario::DailyProfile resolve_profile(const std::string& source, std::size_t agent, const fs::path& base) {
  if (source == "bundled") return scenario::bundled_profile(agent % 4);
  if (source.rfind("bundled:", 0) == 0) {
    try {
      return scenario::bundled_profile(std::stoul(source.substr(8)));
    } catch (const std::exception&) {
      throw ConfigError("fleet[" + std::to_string(agent) + "].profile: unknown bundled profile '" + source + "'");
    }
  }
  const fs::path p = fs::path(source).is_absolute() ? fs::path(source) : base / source;
  try {
    return scenario::load_profile_csv(p);
  } catch (const std::exception& e) {
    throw ConfigError("fleet[" + std::to_string(agent) + "].profile: " + e.what());
  }
}

microgrid::MicrogridParams params_from_json(const json& a, const std::string& where) {
  static const json reference = params_to_json({});
  for (const auto& [key, _] : a.items())
    if (!reference.contains(key) && key != "profile") throw ConfigError(where + "." + key + ": unknown key");
  microgrid::MicrogridParams p;
  p.l_max = get<double>(a, "l_max", where);
  p.g_max = get<double>(a, "g_max", where);
  p.e_max = get<double>(a, "e_max", where);
  p.t_charge_max = get<double>(a, "t_charge_max", where);
  p.t_discharge_max = get<double>(a, "t_discharge_max", where);
  p.e_min = a.value("e_min", p.e_min);
  p.eta_ch = a.value("eta_ch", p.eta_ch);
  p.eta_dis = a.value("eta_dis", p.eta_dis);
  p.e0 = a.value("e0", p.e0);
  p.beta = a.value("beta", p.beta);
  return p;
}

}  // namespace

void RunConfig::validate() const {
  env.validate();
  learner.validate();
  if (!(policy.margin >= 0.0 && policy.margin <= 1.0)) throw ConfigError("policy.margin: must lie in [0, 1]");
  if (episodes < 0) throw ConfigError("episodes: must be >= 0");
}

json config_to_json(const RunConfig& cfg) {
  json fleet = json::array();
  for (const auto& a : cfg.env.agents) {
    json j = params_to_json(a.params);
    j["profile"] = a.profile_source;
    fleet.push_back(std::move(j));
  }
  std::vector<double> emergency(cfg.env.prices.emergency.begin(), cfg.env.prices.emergency.end());
  json compare = json::array();
  for (auto m : cfg.compare) compare.push_back(std::string(market::to_string(m)));
  const auto& d = cfg.env.disruption;
  return {
      {"seed", cfg.seed},
      {"episodes", cfg.episodes},
      {"mechanism", std::string(market::to_string(cfg.env.mechanism))},
      {"compare", compare},
      {"fleet", fleet},
      {"prices", {{"feed_in", cfg.env.prices.feed_in}, {"day_ahead", cfg.env.prices.day_ahead}, {"emergency", emergency}}},
      {"market_factor", {{"lower", cfg.env.m_lower}, {"upper", cfg.env.m_upper}}},
      {"mrda", {{"rounds", cfg.env.mrda.rounds}, {"concession", cfg.env.mrda.concession}}},
      {"noise", {{"process", cfg.env.process_noise}, {"observation", cfg.env.observation_noise}}},
      {"disruption",
       {{"p_sudden", d.p_sudden},
        {"p_gradual", d.p_gradual},
        {"p_failure", d.p_failure},
        {"drop_lo", d.drop_lo},
        {"drop_hi", d.drop_hi},
        {"ramp_hours", d.ramp_hours},
        {"failure_hours", d.failure_hours}}},
      {"horizon", cfg.env.horizon},
      {"window", {{"back", cfg.env.window_back}, {"ahead", cfg.env.window_ahead}}},
      {"dt", cfg.env.dt},
      {"carry_over_energy", cfg.env.carry_over_energy},
      {"policy", {{"rule", std::string(to_string(cfg.policy.rule))}, {"margin", cfg.policy.margin}}},
      {"learner", learner_to_json(cfg.learner)},
  };
}

json default_config_json() {
  json doc = config_to_json(RunConfig{});
  for (std::size_t i = 0; i < doc["fleet"].size(); ++i) doc["fleet"][i]["profile"] = "bundled:" + std::to_string(i);
  return doc;
}

RunConfig config_from_json(const json& user, const fs::path& base_dir) {
  if (!user.is_object()) throw ConfigError("config: top level must be an object");
  json reference = default_config_json();
  // Fleet entries and list values are replaced wholesale, so their keys are checked separately.
  json structural = reference;
  structural["fleet"] = json::object();
  structural["compare"] = json::object();
  structural["prices"]["emergency"] = json::object();
  structural["learner"]["actor_hidden"] = json::object();
  structural["learner"]["critic_hidden"] = json::object();
  check_keys(user, structural, "");

  json doc = reference;
  doc.merge_patch(user);

  RunConfig cfg;
  try {
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.episodes = doc.at("episodes").get<long>();
  } catch (const json::exception&) {
    throw ConfigError("seed/episodes: must be non-negative integers");
  }

  auto& e = cfg.env;
  try {
    e.mechanism = market::parse_mechanism(doc.at("mechanism").get<std::string>());
  } catch (const json::exception&) {
    throw ConfigError("mechanism: must be a string");
  }
  cfg.compare.clear();
  if (!doc.at("compare").is_array()) throw ConfigError("compare: must be a list of mechanism names");
  for (const auto& m : doc.at("compare")) {
    if (!m.is_string()) throw ConfigError("compare: must be a list of mechanism names");
    try {
      cfg.compare.push_back(market::parse_mechanism(m.get<std::string>()));
    } catch (const ConfigError& err) {
      throw ConfigError(std::string("compare: ") + err.what());
    }
  }

  const json& fleet = doc.at("fleet");
  if (!fleet.is_array()) throw ConfigError("fleet: must be a list of microgrids");
  e.agents.clear();
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const std::string where = "fleet[" + std::to_string(i) + "]";
    if (!fleet[i].is_object()) throw ConfigError(where + ": must be an object");
    env::AgentConfig a;
    a.params = params_from_json(fleet[i], where);
    a.profile_source = fleet[i].value("profile", std::string("bundled:") + std::to_string(i % 4));
    a.profile = resolve_profile(a.profile_source, i, base_dir);
    e.agents.push_back(std::move(a));
  }

  try {
    const json& prices = doc.at("prices");
    e.prices.feed_in = prices.at("feed_in").get<double>();
    e.prices.day_ahead = prices.at("day_ahead").get<double>();
    const json& em = prices.at("emergency");
    if (em.is_string()) {
      const std::string s = em.get<std::string>();
      if (s == "default") {
        e.prices.emergency = scenario::default_price_schedule().emergency;
      } else {
        const fs::path p = fs::path(s).is_absolute() ? fs::path(s) : base_dir / s;
        try {
          e.prices.emergency = scenario::load_emergency_csv(p);
        } catch (const std::exception& err) {
          throw ConfigError(std::string("prices.emergency: ") + err.what());
        }
      }
    } else if (em.is_number()) {
      e.prices.emergency.fill(em.get<double>());
    } else {
      const auto v = em.get<std::vector<double>>();
      if (v.size() != static_cast<std::size_t>(scenario::kHoursPerDay))
        throw ConfigError("prices.emergency: expected 24 hourly values");
      std::copy(v.begin(), v.end(), e.prices.emergency.begin());
    }

    e.m_lower = doc.at("market_factor").at("lower").get<double>();
    e.m_upper = doc.at("market_factor").at("upper").get<double>();
    e.mrda.rounds = doc.at("mrda").at("rounds").get<int>();
    e.mrda.concession = doc.at("mrda").at("concession").get<double>();
    e.process_noise = doc.at("noise").at("process").get<double>();
    e.observation_noise = doc.at("noise").at("observation").get<double>();
    const json& d = doc.at("disruption");
    e.disruption.p_sudden = d.at("p_sudden").get<double>();
    e.disruption.p_gradual = d.at("p_gradual").get<double>();
    e.disruption.p_failure = d.at("p_failure").get<double>();
    e.disruption.drop_lo = d.at("drop_lo").get<double>();
    e.disruption.drop_hi = d.at("drop_hi").get<double>();
    e.disruption.ramp_hours = d.at("ramp_hours").get<int>();
    e.disruption.failure_hours = d.at("failure_hours").get<int>();
    e.horizon = doc.at("horizon").get<int>();
    e.window_back = doc.at("window").at("back").get<int>();
    e.window_ahead = doc.at("window").at("ahead").get<int>();
    e.dt = doc.at("dt").get<double>();
    e.carry_over_energy = doc.at("carry_over_energy").get<bool>();

    const json& pol = doc.at("policy");
    cfg.policy.rule = parse_scripted_rule(pol.at("rule").get<std::string>());
    cfg.policy.margin = pol.at("margin").get<double>();

    const json& l = doc.at("learner");
    auto& hp = cfg.learner;
    hp.gamma = l.at("gamma").get<double>();
    hp.lambda = l.at("lambda").get<double>();
    hp.clip_eps = l.at("clip_eps").get<double>();
    hp.entropy_coef = l.at("entropy_coef").get<double>();
    hp.lr_actor = l.at("lr_actor").get<double>();
    hp.lr_critic = l.at("lr_critic").get<double>();
    hp.epochs = l.at("epochs").get<int>();
    hp.minibatch = l.at("minibatch").get<int>();
    hp.episodes = l.at("episodes").get<long>();
    hp.buffer_episodes = l.at("buffer_episodes").get<int>();
    hp.max_grad_norm = l.at("max_grad_norm").get<double>();
    const auto opt = l.at("optimizer").get<std::string>();
    if (opt == "adam") {
      hp.optimizer = marl::OptimizerKind::Adam;
    } else if (opt == "sgd") {
      hp.optimizer = marl::OptimizerKind::Sgd;
    } else {
      throw ConfigError("learner.optimizer: expected adam or sgd, got '" + opt + "'");
    }
    hp.reward_scale = l.at("reward_scale").get<double>();
    hp.lstm_hidden = l.at("lstm_hidden").get<int>();
    hp.actor_hidden = l.at("actor_hidden").get<std::vector<int>>();
    hp.critic_hidden = l.at("critic_hidden").get<std::vector<int>>();
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config: wrong value type (") + err.what() + ")");
  }

  cfg.validate();
  return cfg;
}

void apply_env_overrides(json& doc, const EnvOverrides& vars) {
  for (const auto& [name, raw] : vars) {
    if (name.rfind(kPrefix, 0) != 0) continue;
    std::string rest = lower(name.substr(4));
    std::vector<std::string> parts;
    for (std::size_t pos = 0;;) {
      const std::size_t next = rest.find("__", pos);
      parts.push_back(rest.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    json* node = &doc;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const std::string& key = parts[k];
      const bool last = k + 1 == parts.size();
      if (node->is_array()) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(key);
        } catch (const std::exception&) {
          throw ConfigError(name + ": '" + key + "' is not a list index");
        }
        if (idx >= node->size()) throw ConfigError(name + ": index " + key + " out of range");
        node = &(*node)[idx];
      } else if (node->is_object()) {
        if (!node->contains(key)) throw ConfigError(name + ": unknown key '" + key + "'");
        node = &(*node)[key];
      } else {
        throw ConfigError(name + ": cannot descend into a scalar");
      }
      if (last) {
        json value = json::parse(raw, nullptr, false);
        *node = value.is_discarded() ? json(raw) : value;
      }
    }
  }
}

EnvOverrides process_env_overrides() {
  EnvOverrides vars;
  for (char** e = environ; e && *e; ++e) {
    std::string entry(*e);
    if (entry.rfind(kPrefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    vars.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  std::sort(vars.begin(), vars.end());
  return vars;
}

RunConfig load_config(const fs::path& path, const EnvOverrides& vars) {
  json user = json::object();
  fs::path base = ".";
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    user = json::parse(in, nullptr, false, true);
    if (user.is_discarded()) throw ConfigError("config: " + path.string() + " is not valid JSON");
    base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  }
  if (!vars.empty()) {
    // Overrides address the merged document so every key is reachable.
    json full = default_config_json();
    full.merge_patch(user);
    apply_env_overrides(full, vars);
    user = std::move(full);
  }
  return config_from_json(user, base);
}

RunConfig load_config(const fs::path& path) { return load_config(path, process_env_overrides()); }

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(config_to_json(cfg).dump())); }

}  // namespace p2pgrid
