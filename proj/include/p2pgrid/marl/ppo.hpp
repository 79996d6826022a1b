#pragma once

#include <functional>
#include <span>
#include <vector>

#include "p2pgrid/marl/autodiff.hpp"

namespace p2pgrid::marl {

using ad::Mat;
using ad::Parameter;
using ad::Var;

// Backward recursion delta_t = r_t + gamma V_{t+1} - V_t, A_t = delta_t + gamma lambda A_{t+1},
// with V_T = bootstrap.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double bootstrap, double gamma, double lambda);

double importance_ratio(double logp_new, double logp_old);

// In place: mean 0, unit (population) variance. Leaves singletons at 0.
void normalize_advantages(std::span<double> advantages);

// -(1/B) sum [min(rho A, clip(rho, 1-eps, 1+eps) A) + c H]
double actor_loss(std::span<const double> ratios, std::span<const double> advantages,
                  std::span<const double> entropies, double clip_eps, double entropy_coef);
Var actor_loss(Var logp_new, const Mat& logp_old, const Mat& advantages, Var entropy,
               double clip_eps, double entropy_coef);

// (1/B) sum (V - target)^2
double critic_loss(std::span<const double> values, std::span<const double> targets);
Var critic_loss(Var values, const Mat& targets);

// theta <- theta - lr * grad. Throws ShapeMismatch.
void sgd_update(Mat& params, const Mat& grads, double lr);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

// Applies updates to a fixed set of parameters from their accumulated gradients.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(std::vector<Parameter*> params, OptimizerConfig cfg);

  void zero_grad();
  void step();

  const OptimizerConfig& config() const { return cfg_; }
  long steps() const { return t_; }
  std::vector<Mat>& first_moments() { return m_; }
  std::vector<Mat>& second_moments() { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  std::vector<Parameter*> params_;
  OptimizerConfig cfg_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long t_ = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

// Central differences (step h) against analytic gradients. `loss` evaluates the loss at the
// current parameter values; `analytic` fills Parameter::grad. Relative error per entry is
// |a - n| / max(|a|, |n|, 1e-6); entries over `tol` are retried once with step h/10.
// `max_entries_per_param` = 0 checks everything.
GradCheckReport gradient_check(std::span<Parameter* const> params,
                               const std::function<double()>& loss,
                               const std::function<void()>& analytic, double tol,
                               double h = 1e-5, std::size_t max_entries_per_param = 0);

}  // namespace p2pgrid::marl
