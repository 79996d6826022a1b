#include "p2pgrid/marl/nets.hpp"

#include <cmath>
#include <numbers>

#include "p2pgrid/errors.hpp"

namespace p2pgrid::marl {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

Linear::Linear(int in, int out, const std::string& name, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  weight = Parameter(name + ".weight", uniform_matrix(in, out, bound, rng));
  bias = Parameter(name + ".bias", Mat::Zero(1, out));
}

Var Linear::forward(Tape& tape, Var x) {
  return ad::add_row(ad::matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

LstmCell::LstmCell(int in, int hidden_size, const std::string& name, Rng& rng) : hidden(hidden_size) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  w_input = Parameter(name + ".w_input", uniform_matrix(in, 4 * hidden_size, bound, rng));
  w_hidden = Parameter(name + ".w_hidden", uniform_matrix(hidden_size, 4 * hidden_size, bound, rng));
  Mat b = Mat::Zero(1, 4 * hidden_size);
  b.middleCols(hidden_size, hidden_size).setOnes();
  bias = Parameter(name + ".bias", b);
}

std::pair<Var, Var> LstmCell::forward(Tape& tape, Var x, Var h, Var c) {
  Var gates = ad::add_row(
      ad::add(ad::matmul(x, tape.parameter(w_input)), ad::matmul(h, tape.parameter(w_hidden))),
      tape.parameter(bias));
  const Eigen::Index H = hidden;
  Var i = ad::sigmoid(ad::cols(gates, 0, H));
  Var f = ad::sigmoid(ad::cols(gates, H, H));
  Var g = ad::tanh(ad::cols(gates, 2 * H, H));
  Var o = ad::sigmoid(ad::cols(gates, 3 * H, H));
  Var c_next = ad::add(ad::mul(f, c), ad::mul(i, g));
  Var h_next = ad::mul(o, ad::tanh(c_next));
  return {h_next, c_next};
}

PolicyNet::PolicyNet(PolicyShape shape, std::uint64_t seed) : shape_(std::move(shape)) {
  if (shape_.obs_dim <= 0 || shape_.lstm_hidden <= 0) throw ConfigError("policy: sizes must be positive");
  Rng rng(seed, {static_cast<std::uint64_t>(Stream::Init), 1});
  lstm_ = LstmCell(shape_.obs_dim, shape_.lstm_hidden, "actor.lstm", rng);
  int in = shape_.lstm_hidden;
  for (std::size_t k = 0; k < shape_.hidden.size(); ++k) {
    trunk_.emplace_back(in, shape_.hidden[k], "actor.trunk" + std::to_string(k), rng, std::sqrt(2.0));
    in = shape_.hidden[k];
  }
  mean_head_ = Linear(in, kActionDim, "actor.mean", rng, 0.01);
  log_std_head_ = Linear(in, kActionDim, "actor.log_std", rng, 0.01);
}

RecurrentState PolicyNet::initial_state(Eigen::Index batch) const {
  return {Mat::Zero(batch, shape_.lstm_hidden), Mat::Zero(batch, shape_.lstm_hidden)};
}

PolicyOutput PolicyNet::forward(Tape& tape, const std::vector<Mat>& obs_seq,
                                const RecurrentState& start, RecurrentState* end) {
  if (obs_seq.empty()) throw ShapeMismatch("policy: empty observation sequence");
  Var h = tape.constant(start.h);
  Var c = tape.constant(start.c);
  std::vector<Var> hs;
  hs.reserve(obs_seq.size());
  for (const Mat& x : obs_seq) {
    if (x.cols() != shape_.obs_dim) throw ShapeMismatch("policy: observation width mismatch");
    if (!x.allFinite()) throw NonFiniteInput("policy: observation contains NaN or infinity");
    auto [hn, cn] = lstm_.forward(tape, tape.constant(x), h, c);
    h = hn;
    c = cn;
    hs.push_back(h);
  }
  if (end) *end = {h.value(), c.value()};
  Var z = hs.size() == 1 ? hs.front() : ad::concat_rows(hs);
  for (auto& layer : trunk_) z = ad::relu(layer.forward(tape, z));
  Var mean = mean_head_.forward(tape, z);
  Var log_std = ad::clamp(log_std_head_.forward(tape, z), kLogStdMin, kLogStdMax);
  return {mean, log_std};
}

std::vector<Parameter*> PolicyNet::parameters() {
  std::vector<Parameter*> ps{&lstm_.w_input, &lstm_.w_hidden, &lstm_.bias};
  for (auto& l : trunk_) {
    ps.push_back(&l.weight);
    ps.push_back(&l.bias);
  }
  for (Linear* l : {&mean_head_, &log_std_head_}) {
    ps.push_back(&l->weight);
    ps.push_back(&l->bias);
  }
  return ps;
}

CriticNet::CriticNet(int input_dim, std::vector<int> hidden, std::uint64_t seed) : input_dim_(input_dim) {
  if (input_dim <= 0) throw ConfigError("critic: input size must be positive");
  Rng rng(seed, {static_cast<std::uint64_t>(Stream::Init), 2});
  int in = input_dim;
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    layers_.emplace_back(in, hidden[k], "critic.layer" + std::to_string(k), rng, std::sqrt(2.0));
    in = hidden[k];
  }
  out_ = Linear(in, 1, "critic.out", rng, 1.0);
}

Var CriticNet::forward(Tape& tape, const Mat& batch) {
  if (batch.cols() != input_dim_) throw ShapeMismatch("critic: input width mismatch");
  if (!batch.allFinite()) throw NonFiniteInput("critic: input contains NaN or infinity");
  Var z = tape.constant(batch);
  for (auto& layer : layers_) z = ad::relu(layer.forward(tape, z));
  return out_.forward(tape, z);
}

double CriticNet::value(const Eigen::RowVectorXd& input) {
  Tape tape;
  return forward(tape, Mat(input)).scalar();
}

std::vector<Parameter*> CriticNet::parameters() {
  std::vector<Parameter*> ps;
  for (auto& l : layers_) {
    ps.push_back(&l.weight);
    ps.push_back(&l.bias);
  }
  ps.push_back(&out_.weight);
  ps.push_back(&out_.bias);
  return ps;
}

env::Action squash(const Eigen::RowVectorXd& u) {
  env::Action a;
  a.price_raw = std::tanh(u(0));
  a.qty_frac = 0.5 * (std::tanh(u(1)) + 1.0);
  a.reservation = 0.5 * (std::tanh(u(2)) + 1.0);
  return a;
}

double gaussian_log_prob(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& mean,
                         const Eigen::RowVectorXd& log_std) {
  double lp = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double z = (u(k) - mean(k)) / std::exp(log_std(k));
    lp += -0.5 * z * z - log_std(k) - kHalfLog2Pi;
  }
  return lp;
}

double squash_log_det(const Eigen::RowVectorXd& u) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    // log(1 - tanh^2 u) computed stably
    const double x = std::abs(u(k));
    const double log_sech2 = 2.0 * (std::log(2.0) - x - std::log1p(std::exp(-2.0 * x)));
    s += log_sech2 + (k == 0 ? 0.0 : std::log(0.5));
  }
  return s;
}

Var gaussian_log_prob(Var mean, Var log_std, const Mat& u) {
  Tape& tape = *mean.tape;
  Var diff = ad::sub(tape.constant(u), mean);
  Var inv_std = ad::exp(ad::neg(log_std));
  Var z = ad::mul(diff, inv_std);
  Var per_dim = ad::add_scalar(ad::neg(ad::add(ad::scale(ad::square(z), 0.5), log_std)), -kHalfLog2Pi);
  return ad::row_sum(per_dim);
}

Var gaussian_entropy(Var log_std) {
  return ad::row_sum(ad::add_scalar(log_std, 0.5 + kHalfLog2Pi));
}

double gaussian_entropy(const Eigen::RowVectorXd& log_std) {
  return log_std.sum() + static_cast<double>(log_std.size()) * (0.5 + kHalfLog2Pi);
}

}  // namespace p2pgrid::marl
