#include "p2pgrid/marl/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "p2pgrid/errors.hpp"

namespace p2pgrid::marl {

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double bootstrap, double gamma, double lambda) {
  if (rewards.size() != values.size()) throw ShapeMismatch("gae: rewards and values differ in length");
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    const double next_v = k + 1 < values.size() ? values[k + 1] : bootstrap;
    const double delta = rewards[k] + gamma * next_v - values[k];
    running = delta + gamma * lambda * running;
    adv[k] = running;
  }
  return adv;
}

double importance_ratio(double logp_new, double logp_old) { return std::exp(logp_new - logp_old); }

void normalize_advantages(std::span<double> advantages) {
  if (advantages.empty()) return;
  const double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= n;
  const double sd = std::sqrt(var);
  for (double& a : advantages) a = sd > 1e-12 ? (a - mean) / sd : 0.0;
}

double actor_loss(std::span<const double> ratios, std::span<const double> advantages,
                  std::span<const double> entropies, double clip_eps, double entropy_coef) {
  if (ratios.size() != advantages.size() || ratios.size() != entropies.size())
    throw ShapeMismatch("actor_loss: batch lengths differ");
  if (ratios.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < ratios.size(); ++l) {
    const double unclipped = ratios[l] * advantages[l];
    const double clipped = std::clamp(ratios[l], 1.0 - clip_eps, 1.0 + clip_eps) * advantages[l];
    total += std::min(unclipped, clipped) + entropy_coef * entropies[l];
  }
  return -total / static_cast<double>(ratios.size());
}

Var actor_loss(Var logp_new, const Mat& logp_old, const Mat& advantages, Var entropy,
               double clip_eps, double entropy_coef) {
  ad::Tape& tape = *logp_new.tape;
  Var ratio = ad::exp(ad::sub(logp_new, tape.constant(logp_old)));
  Var adv = tape.constant(advantages);
  Var surr1 = ad::mul(ratio, adv);
  Var surr2 = ad::mul(ad::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv);
  Var objective = ad::add(ad::minimum(surr1, surr2), ad::scale(entropy, entropy_coef));
  return ad::neg(ad::mean(objective));
}

double critic_loss(std::span<const double> values, std::span<const double> targets) {
  if (values.size() != targets.size()) throw ShapeMismatch("critic_loss: batch lengths differ");
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < values.size(); ++l) total += (values[l] - targets[l]) * (values[l] - targets[l]);
  return total / static_cast<double>(values.size());
}

Var critic_loss(Var values, const Mat& targets) {
  return ad::mean(ad::square(ad::sub(values, values.tape->constant(targets))));
}

void sgd_update(Mat& params, const Mat& grads, double lr) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols())
    throw ShapeMismatch("sgd_update: parameter and gradient shapes differ");
  params -= lr * grads;
}

Optimizer::Optimizer(std::vector<Parameter*> params, OptimizerConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Optimizer::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Optimizer::step() {
  double scale = 1.0;
  if (cfg_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (auto* p : params_) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg_.max_grad_norm) scale = cfg_.max_grad_norm / norm;
  }
  ++t_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (cfg_.kind == OptimizerKind::Sgd) {
      sgd_update(p.value, p.grad * scale, cfg_.lr);
      continue;
    }
    const Mat g = p.grad * scale;
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    p.value.array() -= cfg_.lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + cfg_.epsilon);
  }
}

GradCheckReport gradient_check(std::span<Parameter* const> params,
                               const std::function<double()>& loss,
                               const std::function<void()>& analytic, double tol, double h,
                               std::size_t max_entries_per_param) {
  for (auto* p : params) p->zero_grad();
  analytic();
  std::vector<Mat> grads;
  for (auto* p : params) grads.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const Eigen::Index n = p.value.size();
    const Eigen::Index stride =
        max_entries_per_param == 0 || static_cast<Eigen::Index>(max_entries_per_param) >= n
            ? 1
            : n / static_cast<Eigen::Index>(max_entries_per_param);
    for (Eigen::Index idx = 0; idx < n; idx += stride) {
      double& x = p.value.data()[idx];
      const double a = grads[k].data()[idx];
      const auto rel_error = [&](double step) {
        const double saved = x;
        x = saved + step;
        const double up = loss();
        x = saved - step;
        const double down = loss();
        x = saved;
        const double numeric = (up - down) / (2.0 * step);
        return std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      };
      double err = rel_error(h);
      // A ReLU kink inside [x - h, x + h] spoils the difference; a smaller step moves off it,
      // while a wrong analytic value disagrees at every step.
      if (err >= tol) err = std::min(err, rel_error(h / 10.0));
      report.max_rel_error = std::max(report.max_rel_error, err);
      ++report.checked;
    }
  }
  report.pass = report.max_rel_error < tol;
  return report;
}

}  // namespace p2pgrid::marl
