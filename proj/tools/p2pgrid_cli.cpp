#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "p2pgrid/commands.hpp"
#include "p2pgrid/errors.hpp"
#include "p2pgrid/format.hpp"
#include "p2pgrid/version.hpp"

namespace {

using namespace p2pgrid;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> episodes;
  std::string mechanism;
  std::string out = "out";
};

void add_common(CLI::App* sub, CommonArgs& a, bool with_mechanism) {
  sub->add_option("--config", a.config, "JSON config file (defaults apply when omitted)");
  sub->add_option("--seed", a.seed, "Master seed");
  sub->add_option("--episodes", a.episodes, "Number of episodes");
  if (with_mechanism) sub->add_option("--mechanism", a.mechanism, "jpq, greedy, mrda or vvda");
  sub->add_option("--out", a.out, "Output directory");
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.mechanism.empty()) cfg.env.mechanism = market::parse_mechanism(a.mechanism);
  cfg.validate();
  return cfg;
}

std::vector<market::Mechanism> parse_list(const std::string& list) {
  std::vector<market::Mechanism> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = list.find(',', pos);
    const std::string name = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!name.empty()) out.push_back(market::parse_mechanism(name));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void print_summary(const std::vector<EpisodeMetrics>& metrics) {
  const auto s = cmd::summarize(metrics);
  std::cout << "episodes=" << metrics.size() << " reward=" << format_double(s.reward)
            << " emergency_kwh=" << format_double(s.emergency_kwh) << " feedin_kwh=" << format_double(s.feedin_kwh)
            << " storage_kwh=" << format_double(s.storage_kwh) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Peer-to-peer energy trading simulator and LSTM-MAPPO trainer"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonArgs sim_args, cmp_args, train_args;
  auto* sim = app.add_subcommand("simulate", "Run scripted agents and write metrics and a trajectory");
  add_common(sim, sim_args, true);
  std::string policy_rule;
  sim->add_option("--policy", policy_rule, "net-position, random or zero");

  auto* cmp = app.add_subcommand("compare", "Compare clearing mechanisms on paired seeds");
  add_common(cmp, cmp_args, false);
  std::string mechanisms;
  cmp->add_option("--mechanisms", mechanisms, "Comma separated list (default from config)");

  auto* trn = app.add_subcommand("train", "Train LSTM-MAPPO agents");
  add_common(trn, train_args, true);
  bool resume = false;
  trn->add_flag("--resume", resume, "Continue from the checkpoint in --out");

  auto* exp = app.add_subcommand("export", "Convert a trajectory into plot-ready CSV");
  std::string trajectory, format = "tidy-csv", export_out = "export.csv";
  exp->add_option("--trajectory", trajectory, "JSON-lines trajectory")->required();
  exp->add_option("--format", format, "tidy-csv or wide-csv");
  exp->add_option("--out", export_out, "Output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      RunConfig cfg = resolve(sim_args);
      if (!policy_rule.empty()) cfg.policy.rule = parse_scripted_rule(policy_rule);
      const auto m = cmd::cmd_simulate(cfg, sim_args.episodes.value_or(cfg.episodes), sim_args.out);
      print_summary(m);
    } else if (*cmp) {
      const RunConfig cfg = resolve(cmp_args);
      const auto list = mechanisms.empty() ? cfg.compare : parse_list(mechanisms);
      const auto c = cmd::cmd_compare(cfg, list, cmp_args.episodes.value_or(cfg.episodes), cmp_args.out);
      std::cout << cmd::comparison_csv(c) << cmd::deltas_csv(c);
    } else if (*trn) {
      const RunConfig cfg = resolve(train_args);
      const auto r = cmd::cmd_train(cfg, train_args.episodes.value_or(cfg.learner.episodes), train_args.out, resume);
      std::cout << "episodes " << r.first_episode << ".." << r.next_episode << '\n';
      print_summary(r.metrics);
    } else if (*exp) {
      const auto m = cmd::cmd_export(trajectory, format, export_out);
      std::cout << "exported " << m.size() << " episodes to " << export_out << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
