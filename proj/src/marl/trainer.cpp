#include "p2pgrid/marl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "p2pgrid/errors.hpp"
#include "p2pgrid/hash.hpp"
#include "p2pgrid/rng.hpp"

namespace p2pgrid::marl {

using nlohmann::json;

namespace {

constexpr std::uint64_t kEpisodeTag = 0xE9150DE;
constexpr int kCheckpointVersion = 1;

Eigen::RowVectorXd to_row(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_to_json(const Mat& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ShapeMismatch("checkpoint: matrix size");
  return Eigen::Map<const Mat>(data.data(), rows, cols);
}

json params_to_json(const std::vector<Parameter*>& ps, Optimizer& opt) {
  json out;
  auto arr = json::array();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    arr.push_back({{"name", ps[k]->name},
                   {"value", matrix_to_json(ps[k]->value)},
                   {"m", matrix_to_json(opt.first_moments()[k])},
                   {"v", matrix_to_json(opt.second_moments()[k])}});
  }
  out["params"] = std::move(arr);
  out["steps"] = opt.steps();
  return out;
}

void params_from_json(const json& j, const std::vector<Parameter*>& ps, Optimizer& opt) {
  const auto& arr = j.at("params");
  if (arr.size() != ps.size()) throw ShapeMismatch("checkpoint: parameter count differs");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    if (arr[k].at("name").get<std::string>() != ps[k]->name)
      throw ShapeMismatch("checkpoint: parameter name mismatch at " + ps[k]->name);
    Mat v = matrix_from_json(arr[k].at("value"));
    if (v.rows() != ps[k]->value.rows() || v.cols() != ps[k]->value.cols())
      throw ShapeMismatch("checkpoint: shape mismatch for " + ps[k]->name);
    ps[k]->value = v;
    opt.first_moments()[k] = matrix_from_json(arr[k].at("m"));
    opt.second_moments()[k] = matrix_from_json(arr[k].at("v"));
  }
  opt.set_steps(j.at("steps").get<long>());
}

}  // namespace

Hyperparams Hyperparams::published() {
  Hyperparams hp;
  hp.lstm_hidden = 128;
  hp.actor_hidden = {512, 512};
  hp.critic_hidden = {2056, 1024};
  hp.episodes = 7000;
  hp.buffer_episodes = 43;  // 1032 steps, the smallest whole-episode buffer >= 1024
  return hp;
}

void Hyperparams::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("learner.gamma: must lie in (0, 1)");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("learner.lambda: must lie in (0, 1)");
  if (!(clip_eps > 0.0)) throw ConfigError("learner.clip_eps: must be > 0");
  if (!(entropy_coef >= 0.0)) throw ConfigError("learner.entropy_coef: must be >= 0");
  if (!(lr_actor >= 0.0) || !(lr_critic >= 0.0)) throw ConfigError("learner.lr: must be >= 0");
  if (epochs < 1) throw ConfigError("learner.epochs: must be >= 1");
  if (minibatch < 1) throw ConfigError("learner.minibatch: must be >= 1");
  if (episodes < 0) throw ConfigError("learner.episodes: must be >= 0");
  if (buffer_episodes < 1) throw ConfigError("learner.buffer_episodes: must be >= 1");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("learner.max_grad_norm: must be >= 0");
  if (!(reward_scale > 0.0)) throw ConfigError("learner.reward_scale: must be > 0");
  if (lstm_hidden < 1) throw ConfigError("learner.lstm_hidden: must be >= 1");
  for (int h : actor_hidden)
    if (h < 1) throw ConfigError("learner.actor_hidden: sizes must be >= 1");
  for (int h : critic_hidden)
    if (h < 1) throw ConfigError("learner.critic_hidden: sizes must be >= 1");
}

// --- RolloutBuffer -------------------------------------------------------------------------

RolloutBuffer::RolloutBuffer(std::size_t agents, std::size_t capacity_steps)
    : per_agent_(agents), capacity_(capacity_steps) {}

void RolloutBuffer::add(std::size_t agent, EpisodeChunk chunk) {
  auto& v = per_agent_.at(agent);
  if (!v.empty() && v.front().obs.rows() != chunk.obs.rows())
    throw ShapeMismatch("rollout buffer: chunks must have equal length");
  v.push_back(std::move(chunk));
}

std::size_t RolloutBuffer::steps(std::size_t agent) const {
  std::size_t n = 0;
  for (const auto& c : per_agent_.at(agent)) n += static_cast<std::size_t>(c.obs.rows());
  return n;
}

bool RolloutBuffer::full() const {
  if (per_agent_.empty()) return false;
  return steps(0) >= capacity_;
}

void RolloutBuffer::clear() {
  for (auto& v : per_agent_) v.clear();
}

// --- Trainer -------------------------------------------------------------------------------

std::uint64_t episode_seed(std::uint64_t seed, long episode) {
  return derive_key(seed, {kEpisodeTag, static_cast<std::uint64_t>(episode)});
}

Trainer::Trainer(env::EnvConfig cfg, Hyperparams hp, std::uint64_t seed)
    : env_(std::move(cfg)),
      hp_(std::move(hp)),
      seed_(seed),
      buffer_(env_.num_agents(),
              static_cast<std::size_t>(hp_.buffer_episodes) * static_cast<std::size_t>(env_.config().horizon)) {
  hp_.validate();
  const std::size_t n = env_.num_agents();
  const int features = static_cast<int>(env::feature_size(env_.config()));
  for (std::size_t i = 0; i < n; ++i) {
    auto m = std::make_unique<AgentModel>();
    const std::uint64_t agent_seed = derive_key(seed, {static_cast<std::uint64_t>(Stream::Init), i});
    m->actor = PolicyNet({features, hp_.lstm_hidden, hp_.actor_hidden}, agent_seed);
    m->critic = CriticNet(features * static_cast<int>(n), hp_.critic_hidden, agent_seed);
    OptimizerConfig ac{hp_.optimizer, hp_.lr_actor};
    ac.max_grad_norm = hp_.max_grad_norm;
    OptimizerConfig cc{hp_.optimizer, hp_.lr_critic};
    cc.max_grad_norm = hp_.max_grad_norm;
    m->actor_opt = Optimizer(m->actor.parameters(), ac);
    m->critic_opt = Optimizer(m->critic.parameters(), cc);
    models_.push_back(std::move(m));
  }
}

EpisodeMetrics Trainer::rollout(long episode_index, bool learn, bool deterministic) {
  const std::size_t n = models_.size();
  const auto& cfg = env_.config();
  const int T = cfg.horizon;
  const auto F = static_cast<Eigen::Index>(env::feature_size(cfg));

  auto observations = env_.reset(episode_seed(seed_, episode_index));
  std::vector<RecurrentState> hidden;
  for (auto& m : models_) hidden.push_back(m->actor.initial_state(1));

  std::vector<EpisodeChunk> chunks(n);
  for (auto& c : chunks) {
    c.obs.resize(T, F);
    c.global_obs.resize(T, F * static_cast<Eigen::Index>(n));
    c.raw_action.resize(T, kActionDim);
  }

  EpisodeAccumulator acc(n, cfg.dt);
  std::vector<env::Action> actions(n);
  for (int t = 0; t < T; ++t) {
    Eigen::RowVectorXd global(F * static_cast<Eigen::Index>(n));
    std::vector<Eigen::RowVectorXd> local(n);
    for (std::size_t i = 0; i < n; ++i) {
      local[i] = to_row(env_.features(observations[i], i));
      global.segment(static_cast<Eigen::Index>(i) * F, F) = local[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      AgentModel& m = *models_[i];
      Tape tape;
      RecurrentState next;
      const PolicyOutput out = m.actor.forward(tape, {Mat(local[i])}, hidden[i], &next);
      hidden[i] = std::move(next);
      const Eigen::RowVectorXd mean = out.mean.value().row(0);
      const Eigen::RowVectorXd log_std = out.log_std.value().row(0);
      Eigen::RowVectorXd u = mean;
      if (!deterministic) {
        Rng rng(seed_, {static_cast<std::uint64_t>(Stream::Policy), static_cast<std::uint64_t>(episode_index), i,
                        static_cast<std::uint64_t>(t)});
        for (Eigen::Index k = 0; k < kActionDim; ++k) u(k) = mean(k) + std::exp(log_std(k)) * rng.normal();
      }
      actions[i] = squash(u);
      if (learn) {
        EpisodeChunk& c = chunks[i];
        c.obs.row(t) = local[i];
        c.global_obs.row(t) = global;
        c.raw_action.row(t) = u;
        c.log_prob.push_back(gaussian_log_prob(u, mean, log_std));
        c.value.push_back(m.critic.value(global));
      }
    }
    const env::StepResult res = env_.step(actions);
    acc.add(res);
    if (learn) {
      for (std::size_t i = 0; i < n; ++i) chunks[i].reward.push_back(res.rewards[i].to_double() * hp_.reward_scale);
    }
    observations = res.observations;
  }

  if (learn) {
    for (std::size_t i = 0; i < n; ++i) {
      EpisodeChunk& c = chunks[i];
      c.advantage = compute_gae(c.reward, c.value, 0.0, hp_.gamma, hp_.lambda);
      c.target.resize(c.advantage.size());
      for (std::size_t k = 0; k < c.advantage.size(); ++k) c.target[k] = c.advantage[k] + c.value[k];
      buffer_.add(i, std::move(c));
    }
  }
  return acc.finish(episode_index);
}

void Trainer::update() {
  const std::size_t n = models_.size();
  if (n == 0 || buffer_.chunks(0).empty()) return;
  const std::size_t num_chunks = buffer_.chunks(0).size();
  const std::size_t T = static_cast<std::size_t>(buffer_.chunks(0).front().obs.rows());
  const std::size_t per_batch =
      std::clamp<std::size_t>(static_cast<std::size_t>(hp_.minibatch) / T, 1, num_chunks);

  UpdateStats stats;
  double entropy_sum = 0.0;
  long count = 0;
  for (int epoch = 0; epoch < hp_.epochs; ++epoch) {
    std::vector<std::size_t> order(num_chunks);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed_, {static_cast<std::uint64_t>(Stream::Minibatch), static_cast<std::uint64_t>(update_index_),
                    static_cast<std::uint64_t>(epoch)});
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);

    for (std::size_t start = 0; start < num_chunks; start += per_batch) {
      const std::size_t end = std::min(num_chunks, start + per_batch);
      const auto B = static_cast<Eigen::Index>(end - start);
      for (std::size_t i = 0; i < n; ++i) {
        AgentModel& m = *models_[i];
        const auto& chunks = buffer_.chunks(i);
        const Eigen::Index F = chunks.front().obs.cols();
        const Eigen::Index G = chunks.front().global_obs.cols();

        // time-major stacking: row t*B + b
        std::vector<Mat> obs_seq(T, Mat(B, F));
        Mat u(static_cast<Eigen::Index>(T) * B, kActionDim);
        Mat logp_old(static_cast<Eigen::Index>(T) * B, 1);
        Mat adv(static_cast<Eigen::Index>(T) * B, 1);
        Mat targets(static_cast<Eigen::Index>(T) * B, 1);
        Mat global(static_cast<Eigen::Index>(T) * B, G);
        for (Eigen::Index b = 0; b < B; ++b) {
          const EpisodeChunk& c = chunks[order[start + static_cast<std::size_t>(b)]];
          for (std::size_t t = 0; t < T; ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            const Eigen::Index row = ti * B + b;
            obs_seq[t].row(b) = c.obs.row(ti);
            u.row(row) = c.raw_action.row(ti);
            logp_old(row, 0) = c.log_prob[t];
            adv(row, 0) = c.advantage[t];
            targets(row, 0) = c.target[t];
            global.row(row) = c.global_obs.row(ti);
          }
        }
        normalize_advantages(std::span<double>(adv.data(), static_cast<std::size_t>(adv.size())));

        {
          m.actor_opt.zero_grad();
          Tape tape;
          const PolicyOutput out = m.actor.forward(tape, obs_seq, m.actor.initial_state(B));
          Var logp = gaussian_log_prob(out.mean, out.log_std, u);
          Var entropy = gaussian_entropy(out.log_std);
          Var loss = actor_loss(logp, logp_old, adv, entropy, hp_.clip_eps, hp_.entropy_coef);
          tape.backward(loss);
          m.actor_opt.step();
          stats.actor_loss = loss.scalar();
          entropy_sum += entropy.value().mean();
        }
        {
          m.critic_opt.zero_grad();
          Tape tape;
          Var values = m.critic.forward(tape, global);
          Var loss = critic_loss(values, targets);
          tape.backward(loss);
          m.critic_opt.step();
          stats.critic_loss = loss.scalar();
        }
        ++count;
      }
    }
  }
  stats.entropy = count > 0 ? entropy_sum / static_cast<double>(count) : 0.0;
  stats.updates = stats_.updates + 1;
  stats_ = stats;
  ++update_index_;
  buffer_.clear();
}

EpisodeMetrics Trainer::run_episode() {
  EpisodeMetrics m = rollout(next_episode_, true, false);
  ++next_episode_;
  if (buffer_.full()) update();
  return m;
}

std::vector<EpisodeMetrics> Trainer::train(long episodes,
                                           const std::function<void(const EpisodeMetrics&)>& on_episode) {
  std::vector<EpisodeMetrics> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, episodes)));
  for (long e = 0; e < episodes; ++e) {
    out.push_back(run_episode());
    if (on_episode) on_episode(out.back());
  }
  return out;
}

EpisodeMetrics Trainer::evaluate(long episode_index, bool deterministic) {
  return rollout(episode_index, false, deterministic);
}

void Trainer::save_checkpoint(const std::filesystem::path& path, const std::string& config_hash) const {
  json payload;
  payload["format"] = "p2pgrid-checkpoint";
  payload["version"] = kCheckpointVersion;
  payload["config_hash"] = config_hash;
  payload["seed"] = seed_;
  payload["next_episode"] = next_episode_;
  payload["update_index"] = update_index_;
  payload["updates"] = stats_.updates;
  auto agents = json::array();
  for (const auto& m : models_) {
    agents.push_back({{"actor", params_to_json(m->actor.parameters(), m->actor_opt)},
                      {"critic", params_to_json(m->critic.parameters(), m->critic_opt)}});
  }
  payload["agents"] = std::move(agents);
  const std::string body = payload.dump();
  json doc;
  doc["payload"] = payload;
  doc["checksum"] = hex64(fnv1a64(body));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
}

void Trainer::load_checkpoint(const std::filesystem::path& path, const std::string& config_hash) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception&) {
    throw ChecksumMismatch("checkpoint " + path.string() + " is not valid JSON");
  }
  if (!doc.contains("payload") || !doc.contains("checksum"))
    throw ChecksumMismatch("checkpoint " + path.string() + " is missing its checksum");
  const json& payload = doc["payload"];
  if (hex64(fnv1a64(payload.dump())) != doc["checksum"].get<std::string>())
    throw ChecksumMismatch("checkpoint " + path.string() + " failed its checksum");
  if (payload.value("version", 0) != kCheckpointVersion)
    throw ConfigError("checkpoint: unsupported version");
  if (payload.at("config_hash").get<std::string>() != config_hash)
    throw ConfigError("checkpoint: config hash differs from the current config");
  const auto& agents = payload.at("agents");
  if (agents.size() != models_.size()) throw ConfigError("checkpoint: agent count differs");
  for (std::size_t i = 0; i < models_.size(); ++i) {
    params_from_json(agents[i].at("actor"), models_[i]->actor.parameters(), models_[i]->actor_opt);
    params_from_json(agents[i].at("critic"), models_[i]->critic.parameters(), models_[i]->critic_opt);
  }
  next_episode_ = payload.at("next_episode").get<long>();
  update_index_ = payload.at("update_index").get<long>();
  stats_ = {};
  stats_.updates = payload.at("updates").get<long>();
  buffer_.clear();
}

TrainResult train(const env::EnvConfig& cfg, const Hyperparams& hp, std::uint64_t seed) {
  TrainResult r;
  r.trainer = std::make_unique<Trainer>(cfg, hp, seed);
  r.metrics = r.trainer->train(hp.episodes);
  return r;
}

}  // namespace p2pgrid::marl
