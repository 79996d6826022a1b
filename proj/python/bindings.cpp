#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "json.hpp"
#include "p2pgrid/commands.hpp"
#include "p2pgrid/config.hpp"
#include "p2pgrid/env.hpp"
#include "p2pgrid/errors.hpp"
#include "p2pgrid/market.hpp"
#include "p2pgrid/marl/ppo.hpp"
#include "p2pgrid/version.hpp"

namespace py = pybind11;
using namespace p2pgrid;
using nlohmann::json;

namespace {

RunConfig parse_config(const std::string& text) {
  if (text.empty()) return load_config({}, {});
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config: not valid JSON");
  RunConfig cfg = config_from_json(doc);
  cfg.validate();
  return cfg;
}

py::dict metrics_dict(const EpisodeMetrics& m) {
  py::dict d;
  d["episode"] = m.episode;
  d["reward"] = m.reward;
  d["emergency_kwh"] = m.emergency_kwh;
  d["feedin_kwh"] = m.feedin_kwh;
  d["storage_kwh"] = m.storage_kwh;
  d["agent_reward"] = m.agent_reward;
  d["max_balance_residual"] = m.max_balance_residual;
  return d;
}

py::list metrics_list(const std::vector<EpisodeMetrics>& ms) {
  py::list out;
  for (const auto& m : ms) out.append(metrics_dict(m));
  return out;
}

py::list fills_list(const market::TradeLedger& ledger) {
  py::list out;
  for (const auto& f : ledger.fills()) {
    py::dict d;
    d["buyer"] = f.buyer;
    d["seller"] = f.seller;
    d["kwh"] = f.kwh;
    d["buyer_price"] = f.buyer_price;
    d["seller_price"] = f.seller_price;
    out.append(d);
  }
  return out;
}

// Gym-style wrapper over the native environment; observations are flat feature lists.
class PyEnv {
 public:
  explicit PyEnv(const std::string& config) : env_(parse_config(config).env) {}

  std::vector<std::vector<double>> reset(std::uint64_t seed) { return features(env_.reset(seed)); }

  py::dict step(const std::vector<std::array<double, 3>>& actions) {
    std::vector<env::Action> acts;
    for (const auto& a : actions) acts.push_back({a[0], a[1], a[2]});
    const auto r = env_.step(acts);
    py::dict d;
    d["hour"] = r.hour;
    d["m"] = r.m.value();
    d["rewards"] = r.reward_values();
    d["energy"] = r.energy;
    d["observations"] = features(r.observations);
    d["trades"] = fills_list(r.ledger);
    d["done"] = r.done;
    return d;
  }

  std::size_t num_agents() const { return env_.num_agents(); }
  bool done() const { return env_.done(); }

 private:
  std::vector<std::vector<double>> features(const std::vector<env::Observation>& obs) const {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < obs.size(); ++i) out.push_back(env_.features(obs[i], i));
    return out;
  }

  env::Environment env_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Peer-to-peer microgrid market simulator and multi-agent PPO trainer";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ChecksumMismatch>(m, "ChecksumMismatch", base.ptr());
  py::register_exception<UnknownFormat>(m, "UnknownFormat", base.ptr());

  m.def("default_config", [] { return default_config_json().dump(); });
  m.def("config_hash", [](const std::string& cfg) { return config_hash(parse_config(cfg)); });

  m.def(
      "clear",
      [](const std::string& mechanism, const std::vector<std::tuple<std::size_t, double, double>>& quotes, int m,
         double feed_in, double day_ahead, double emergency) {
        std::vector<market::Quotation> qs;
        for (const auto& [agent, price, qty] : quotes) qs.push_back({agent, price, qty});
        const market::ClearingContext ctx{market::MarketFactor(m), {feed_in, day_ahead, emergency}, {}};
        return fills_list(market::clear(market::parse_mechanism(mechanism), qs, ctx));
      },
      py::arg("mechanism"), py::arg("quotes"), py::arg("m") = 0, py::arg("feed_in") = 0.2,
      py::arg("day_ahead") = 1.0, py::arg("emergency") = 2.0);

  m.def("gae", [](const std::vector<double>& r, const std::vector<double>& v, double bootstrap, double gamma,
                  double lambda) { return marl::compute_gae(r, v, bootstrap, gamma, lambda); },
        py::arg("rewards"), py::arg("values"), py::arg("bootstrap") = 0.0, py::arg("gamma") = 0.95,
        py::arg("lam") = 0.95);
  m.def("actor_loss", [](const std::vector<double>& ratios, const std::vector<double>& adv,
                         const std::vector<double>& ent, double eps, double c) {
    return marl::actor_loss(ratios, adv, ent, eps, c);
  });

  m.def("simulate", [](const std::string& cfg, long episodes) {
    return metrics_list(cmd::simulate(parse_config(cfg), episodes));
  });
  m.def("compare", [](const std::string& cfg, const std::vector<std::string>& names, long episodes) {
    std::vector<market::Mechanism> mechs;
    for (const auto& n : names) mechs.push_back(market::parse_mechanism(n));
    const auto c = cmd::compare(parse_config(cfg), mechs, episodes);
    return std::make_pair(cmd::comparison_csv(c), cmd::deltas_csv(c));
  });
  m.def("train", [](const std::string& cfg, long episodes, const std::string& out_dir, bool resume) {
    return metrics_list(cmd::cmd_train(parse_config(cfg), episodes, out_dir, resume).metrics);
  });

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&>(), py::arg("config") = "")
      .def("reset", &PyEnv::reset, py::arg("seed"))
      .def("step", &PyEnv::step, py::arg("actions"))
      .def_property_readonly("num_agents", &PyEnv::num_agents)
      .def_property_readonly("done", &PyEnv::done);
}
