#include "p2pgrid/commands.hpp"

#include <fstream>
#include <sstream>

#include "p2pgrid/errors.hpp"
#include "p2pgrid/format.hpp"
#include "p2pgrid/io.hpp"
#include "p2pgrid/version.hpp"

namespace p2pgrid::cmd {

using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string summary_fields(const MetricSummary& s) {
  return format_double(s.reward) + ',' + format_double(s.emergency_kwh) + ',' + format_double(s.feedin_kwh) + ',' +
         format_double(s.storage_kwh);
}

}  // namespace

EpisodeMetrics run_scripted_episode(env::Environment& environment, const ScriptedPolicy& policy,
                                    std::uint64_t seed, long episode, std::ostream* trajectory) {
  environment.reset(marl::episode_seed(seed, episode));
  EpisodeAccumulator acc(environment.num_agents(), environment.config().dt);
  while (!environment.done()) {
    const auto actions = policy.act(environment.state(), environment.config(), seed, episode);
    const env::StepResult res = environment.step(actions);
    acc.add(res);
    if (trajectory) io::write_step_line(*trajectory, episode, res);
  }
  return acc.finish(episode);
}

std::vector<EpisodeMetrics> simulate(const RunConfig& cfg, long episodes, std::ostream* trajectory) {
  cfg.validate();
  if (episodes < 0) throw ConfigError("episodes: must be >= 0");
  env::Environment environment(cfg.env);
  std::vector<EpisodeMetrics> out;
  for (long e = 0; e < episodes; ++e) out.push_back(run_scripted_episode(environment, cfg.policy, cfg.seed, e, trajectory));
  return out;
}

std::vector<EpisodeMetrics> cmd_simulate(const RunConfig& cfg, long episodes, const fs::path& out_dir) {
  ensure_dir(out_dir);
  std::ostringstream traj;
  const auto metrics = simulate(cfg, episodes, &traj);
  std::ostringstream csv;
  io::write_metrics_csv(csv, metrics, cfg.env.agents.size());
  io::write_text_file(out_dir / "metrics.csv", csv.str());
  io::write_text_file(out_dir / "trajectory.jsonl", traj.str());
  return metrics;
}

MetricSummary summarize(const std::vector<EpisodeMetrics>& metrics) {
  MetricSummary s;
  if (metrics.empty()) return s;
  for (const auto& m : metrics) {
    s.reward += m.reward;
    s.emergency_kwh += m.emergency_kwh;
    s.feedin_kwh += m.feedin_kwh;
    s.storage_kwh += m.storage_kwh;
  }
  const double n = static_cast<double>(metrics.size());
  s.reward /= n;
  s.emergency_kwh /= n;
  s.feedin_kwh /= n;
  s.storage_kwh /= n;
  return s;
}

Comparison compare(const RunConfig& cfg, const std::vector<market::Mechanism>& mechanisms, long episodes) {
  if (mechanisms.size() < 2) throw ConfigError("compare: at least two mechanisms are required");
  Comparison c;
  for (auto mech : mechanisms) {
    RunConfig arm = cfg;
    arm.env.mechanism = mech;
    c.rows.push_back({mech, summarize(simulate(arm, episodes))});
  }
  for (std::size_t a = 0; a < c.rows.size(); ++a) {
    for (std::size_t b = a + 1; b < c.rows.size(); ++b) {
      const auto& x = c.rows[a].summary;
      const auto& y = c.rows[b].summary;
      c.deltas.push_back({c.rows[a].mechanism, c.rows[b].mechanism,
                          {x.reward - y.reward, x.emergency_kwh - y.emergency_kwh, x.feedin_kwh - y.feedin_kwh,
                           x.storage_kwh - y.storage_kwh}});
    }
  }
  return c;
}

std::string comparison_csv(const Comparison& c) {
  std::string out = "mechanism,reward,emergency_kwh,feedin_kwh,storage_kwh\n";
  for (const auto& r : c.rows) out += std::string(market::to_string(r.mechanism)) + ',' + summary_fields(r.summary) + '\n';
  return out;
}

std::string deltas_csv(const Comparison& c) {
  std::string out = "mechanism_a,mechanism_b,d_reward,d_emergency_kwh,d_feedin_kwh,d_storage_kwh\n";
  for (const auto& d : c.deltas)
    out += std::string(market::to_string(d.a)) + ',' + std::string(market::to_string(d.b)) + ',' +
           summary_fields(d.diff) + '\n';
  return out;
}

Comparison cmd_compare(const RunConfig& cfg, const std::vector<market::Mechanism>& mechanisms, long episodes,
                       const fs::path& out_dir) {
  const Comparison c = compare(cfg, mechanisms, episodes);
  ensure_dir(out_dir);
  io::write_text_file(out_dir / "compare.csv", comparison_csv(c));
  io::write_text_file(out_dir / "compare_deltas.csv", deltas_csv(c));
  return c;
}

TrainOutcome cmd_train(const RunConfig& cfg, long episodes, const fs::path& out_dir, bool resume) {
  cfg.validate();
  if (episodes < 0) throw ConfigError("episodes: must be >= 0");
  ensure_dir(out_dir);
  const std::string hash = config_hash(cfg);
  const fs::path checkpoint = out_dir / "checkpoint.json";
  const fs::path metrics_path = out_dir / "metrics.csv";

  marl::Trainer trainer(cfg.env, cfg.learner, cfg.seed);
  std::string csv;
  if (resume) {
    if (!fs::exists(checkpoint)) throw IoError("resume: no checkpoint at " + checkpoint.string());
    trainer.load_checkpoint(checkpoint, hash);
    if (fs::exists(metrics_path)) {
      // Drop rows past the checkpoint so the series continues from the recorded episode.
      std::istringstream in(io::read_text_file(metrics_path));
      std::string line;
      std::getline(in, line);
      csv = line + '\n';
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stol(line.substr(0, line.find(','))) < trainer.next_episode()) csv += line + '\n';
      }
    }
  }
  if (csv.empty()) csv = metrics_csv_header(cfg.env.agents.size()) + '\n';

  TrainOutcome outcome;
  outcome.first_episode = trainer.next_episode();
  outcome.metrics = trainer.train(episodes);
  outcome.next_episode = trainer.next_episode();
  for (const auto& m : outcome.metrics) csv += metrics_csv_row(m) + '\n';

  trainer.save_checkpoint(checkpoint, hash);
  io::write_text_file(metrics_path, csv);
  const json manifest = {{"config_hash", hash},
                         {"seed", cfg.seed},
                         {"version", kVersion},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                       "." + std::to_string(EIGEN_MINOR_VERSION)},
                         {"next_episode", outcome.next_episode},
                         {"updates", trainer.last_update().updates},
                         {"checkpoint", "checkpoint.json"},
                         {"metrics", "metrics.csv"},
                         {"config", config_to_json(cfg)}};
  io::write_text_file(out_dir / "manifest.json", manifest.dump(2) + '\n');
  return outcome;
}

std::vector<EpisodeMetrics> cmd_export(const fs::path& trajectory, const std::string& format, const fs::path& out) {
  const io::ExportFormat fmt = io::parse_export_format(format);
  std::ifstream in(trajectory);
  if (!in) throw IoError("cannot open trajectory " + trajectory.string());
  const auto metrics = io::metrics_from_trajectory(in);
  std::ostringstream csv;
  if (fmt == io::ExportFormat::TidyCsv) {
    io::write_tidy_csv(csv, metrics);
  } else {
    io::write_metrics_csv(csv, metrics, metrics.empty() ? 0 : metrics.front().agent_reward.size());
  }
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  io::write_text_file(out, csv.str());
  return metrics;
}

}  // namespace p2pgrid::cmd
