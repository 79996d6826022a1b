#include "p2pgrid/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/format.hpp"

namespace p2pgrid::io {

using nlohmann::json;

json step_to_json(long episode, const env::StepResult& step) {
  json agents = json::array();
  for (std::size_t i = 0; i < step.settlements.size(); ++i) {
    const auto& s = step.settlements[i];
    const auto& q = step.quotes[i];
    agents.push_back({{"load", step.load[i]},
                      {"gen", step.gen[i]},
                      {"q_da", s.q_da},
                      {"q_b", s.q_b},
                      {"q_s", s.q_s},
                      {"q_e", s.q_e},
                      {"q_fit", s.q_fit},
                      {"t_ess", s.t_ess},
                      {"energy", step.energy[i]},
                      {"reward", step.rewards[i].to_double()},
                      {"price", q.price},
                      {"quantity", q.quantity}});
  }
  json trades = json::array();
  for (const auto& f : step.ledger.fills()) {
    trades.push_back({{"buyer", f.buyer},
                      {"seller", f.seller},
                      {"kwh", f.kwh},
                      {"buyer_price", f.buyer_price},
                      {"seller_price", f.seller_price}});
  }
  return {{"episode", episode}, {"hour", step.hour}, {"m", step.m.value()}, {"agents", agents}, {"trades", trades}};
}

void write_step_line(std::ostream& out, long episode, const env::StepResult& step) {
  out << step_to_json(episode, step).dump() << '\n';
}

std::vector<EpisodeMetrics> metrics_from_trajectory(std::istream& in) {
  std::vector<EpisodeMetrics> out;
  std::string line;
  long line_no = 0;
  long current = -1;
  std::size_t agents = 0;
  EpisodeAccumulator acc(0);
  std::vector<double> reward, emergency, feedin, storage;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError("trajectory line " + std::to_string(line_no) + ": not a JSON object");
    try {
      const long episode = j.at("episode").get<long>();
      const auto& a = j.at("agents");
      if (current < 0 || episode != current) {
        if (current >= 0) out.push_back(acc.finish(current));
        current = episode;
        agents = a.size();
        acc = EpisodeAccumulator(agents);
      }
      if (a.size() != agents) throw DataError("trajectory line " + std::to_string(line_no) + ": agent count changed");
      reward.assign(agents, 0.0);
      emergency.assign(agents, 0.0);
      feedin.assign(agents, 0.0);
      storage.assign(agents, 0.0);
      for (std::size_t i = 0; i < agents; ++i) {
        reward[i] = a[i].at("reward").get<double>();
        emergency[i] = a[i].at("q_e").get<double>();
        feedin[i] = a[i].at("q_fit").get<double>();
        storage[i] = a[i].at("energy").get<double>();
      }
      acc.add(reward, emergency, feedin, storage);
    } catch (const json::exception& e) {
      throw DataError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (current >= 0) out.push_back(acc.finish(current));
  return out;
}

ExportFormat parse_export_format(std::string_view name) {
  if (name == "tidy-csv") return ExportFormat::TidyCsv;
  if (name == "wide-csv") return ExportFormat::WideCsv;
  throw UnknownFormat("unknown export format '" + std::string(name) + "' (expected tidy-csv or wide-csv)");
}

void write_tidy_csv(std::ostream& out, const std::vector<EpisodeMetrics>& metrics) {
  out << "episode,metric,agent,value\n";
  for (const auto& m : metrics) {
    const std::vector<double>* per_agent[] = {&m.agent_reward, &m.agent_emergency_kwh, &m.agent_feedin_kwh,
                                              &m.agent_storage_kwh};
    const double community[] = {m.reward, m.emergency_kwh, m.feedin_kwh, m.storage_kwh};
    for (std::size_t k = 0; k < std::size(kMetricNames); ++k) {
      for (std::size_t i = 0; i < per_agent[k]->size(); ++i)
        out << m.episode << ',' << kMetricNames[k] << ',' << i << ',' << format_double((*per_agent[k])[i]) << '\n';
      out << m.episode << ',' << kMetricNames[k] << ",community," << format_double(community[k]) << '\n';
    }
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<EpisodeMetrics>& metrics, std::size_t agents) {
  out << metrics_csv_header(agents) << '\n';
  for (const auto& m : metrics) out << metrics_csv_row(m) << '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace p2pgrid::io
