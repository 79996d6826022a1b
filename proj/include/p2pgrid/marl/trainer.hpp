#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "p2pgrid/env.hpp"
#include "p2pgrid/marl/nets.hpp"
#include "p2pgrid/marl/ppo.hpp"
#include "p2pgrid/metrics.hpp"

namespace p2pgrid::marl {

struct Hyperparams {
  double gamma = 0.95;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double lr_actor = 3e-4;
  double lr_critic = 1e-3;
  int epochs = 10;
  int minibatch = 512;      // samples; rounded to whole episode chunks
  long episodes = 500;
  int buffer_episodes = 4;  // episodes collected per update
  double max_grad_norm = 0.5;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double reward_scale = 0.1;  // applied to rewards seen by the learner only
  int lstm_hidden = 32;
  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{128, 64};

  static Hyperparams desk() { return {}; }
  // Network sizes and batch settings used for the published experiments.
  static Hyperparams published();
  void validate() const;
};

// One agent's stored episode; rows are hours.
struct EpisodeChunk {
  Mat obs;         // T x F, local features
  Mat global_obs;  // T x (N F), all agents' features
  Mat raw_action;  // T x 3, pre-squash samples
  std::vector<double> log_prob;  // Gaussian log density of raw_action under the behaviour policy
  std::vector<double> reward;    // scaled
  std::vector<double> value;
  std::vector<double> advantage;
  std::vector<double> target;
};

// Per-agent trajectories awaiting an update.
class RolloutBuffer {
 public:
  RolloutBuffer(std::size_t agents, std::size_t capacity_steps);

  void add(std::size_t agent, EpisodeChunk chunk);
  std::vector<EpisodeChunk>& chunks(std::size_t agent) { return per_agent_.at(agent); }
  std::size_t steps(std::size_t agent) const;
  bool full() const;
  void clear();

 private:
  std::vector<std::vector<EpisodeChunk>> per_agent_;
  std::size_t capacity_;
};

struct AgentModel {
  PolicyNet actor;
  CriticNet critic;
  Optimizer actor_opt;
  Optimizer critic_opt;
};

struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  long updates = 0;
};

// LSTM-MAPPO under centralised training, decentralised execution: each agent owns an actor
// fed only its own features and a critic fed every agent's features.
class Trainer {
 public:
  Trainer(env::EnvConfig cfg, Hyperparams hp, std::uint64_t seed);

  // Collects one episode and updates all agents once the buffer is full.
  EpisodeMetrics run_episode();
  std::vector<EpisodeMetrics> train(long episodes,
                                    const std::function<void(const EpisodeMetrics&)>& on_episode = {});

  // Runs one episode with the current policies without learning. `deterministic` uses the
  // squashed Gaussian means.
  EpisodeMetrics evaluate(long episode_index, bool deterministic);

  long next_episode() const { return next_episode_; }
  const UpdateStats& last_update() const { return stats_; }
  std::size_t num_agents() const { return models_.size(); }
  AgentModel& model(std::size_t agent) { return *models_.at(agent); }
  const env::EnvConfig& env_config() const { return env_.config(); }
  const Hyperparams& hyperparams() const { return hp_; }
  std::uint64_t seed() const { return seed_; }

  // Runs one PPO update over the buffered chunks of every agent.
  void update();
  RolloutBuffer& buffer() { return buffer_; }

  void save_checkpoint(const std::filesystem::path& path, const std::string& config_hash) const;
  // Restores parameters, optimizer state and the episode counter. Throws ChecksumMismatch
  // when the file was altered and ConfigError when the config hash differs.
  void load_checkpoint(const std::filesystem::path& path, const std::string& config_hash);

 private:
  EpisodeMetrics rollout(long episode_index, bool learn, bool deterministic);

  env::Environment env_;
  Hyperparams hp_;
  std::uint64_t seed_;
  std::vector<std::unique_ptr<AgentModel>> models_;
  RolloutBuffer buffer_;
  long next_episode_ = 0;
  long update_index_ = 0;
  UpdateStats stats_;
};

std::uint64_t episode_seed(std::uint64_t seed, long episode);

struct TrainResult {
  std::vector<EpisodeMetrics> metrics;
  std::unique_ptr<Trainer> trainer;
};

TrainResult train(const env::EnvConfig& cfg, const Hyperparams& hp, std::uint64_t seed);

}  // namespace p2pgrid::marl
