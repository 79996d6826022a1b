#pragma once

#include <cstdint>
#include <vector>

#include "p2pgrid/env.hpp"
#include "p2pgrid/marl/autodiff.hpp"
#include "p2pgrid/rng.hpp"

namespace p2pgrid::marl {

using ad::Mat;
using ad::Parameter;
using ad::Tape;
using ad::Var;

inline constexpr int kActionDim = 3;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct Linear {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out

  Linear() = default;
  Linear(int in, int out, const std::string& name, Rng& rng, double gain = 1.0);
  Var forward(Tape& tape, Var x);
};

// Single-layer LSTM over batch-major inputs (rows are sequences). Gate order i, f, g, o.
struct LstmCell {
  Parameter w_input;   // in x 4H
  Parameter w_hidden;  // H x 4H
  Parameter bias;      // 1 x 4H, forget gate initialised to 1
  int hidden = 0;

  LstmCell() = default;
  LstmCell(int in, int hidden, const std::string& name, Rng& rng);
  // Returns (h', c').
  std::pair<Var, Var> forward(Tape& tape, Var x, Var h, Var c);
};

struct PolicyShape {
  int obs_dim = 0;
  int lstm_hidden = 32;
  std::vector<int> hidden{64, 64};
};

struct RecurrentState {
  Mat h;
  Mat c;
};

// Stacked per-step outputs of the actor; rows are time-major (row t*B + b).
struct PolicyOutput {
  Var mean;     // pre-squash Gaussian means
  Var log_std;  // clamped to [kLogStdMin, kLogStdMax]
};

// Recurrent actor: LSTM encoder, ReLU trunk, Gaussian heads over the 3-dim action.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(PolicyShape shape, std::uint64_t seed);

  const PolicyShape& shape() const { return shape_; }
  RecurrentState initial_state(Eigen::Index batch) const;

  // obs_seq[t] is (B x obs_dim). Throws NonFiniteInput on NaN/inf input.
  PolicyOutput forward(Tape& tape, const std::vector<Mat>& obs_seq, const RecurrentState& start,
                       RecurrentState* end = nullptr);

  std::vector<Parameter*> parameters();

 private:
  PolicyShape shape_;
  LstmCell lstm_;
  std::vector<Linear> trunk_;
  Linear mean_head_;
  Linear log_std_head_;
};

// Centralised value function over the concatenation of every agent's features.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(int input_dim, std::vector<int> hidden, std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  Var forward(Tape& tape, const Mat& batch);  // (B x 1)
  double value(const Eigen::RowVectorXd& input);
  std::vector<Parameter*> parameters();

 private:
  int input_dim_ = 0;
  std::vector<Linear> layers_;
  Linear out_;
};

// Squashed diagonal Gaussian helpers. `u` is the pre-squash sample.
env::Action squash(const Eigen::RowVectorXd& u);
// Diagonal Gaussian log density of the pre-squash sample.
double gaussian_log_prob(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& mean,
                         const Eigen::RowVectorXd& log_std);
// log |d squash / du| summed over dimensions.
double squash_log_det(const Eigen::RowVectorXd& u);
// Gaussian log density for stacked rows; u is constant. Returns (N x 1).
Var gaussian_log_prob(Var mean, Var log_std, const Mat& u);
// Entropy of the pre-squash Gaussian per row, (N x 1).
Var gaussian_entropy(Var log_std);
double gaussian_entropy(const Eigen::RowVectorXd& log_std);

}  // namespace p2pgrid::marl
