#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <vector>

#include "gaitlab/policy.hpp"

namespace gaitlab {

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double entropy_coef = 0.007;
  double value_coef = 1.0;
  double kl_target = 0.01;
  int agents = 256;
  int full_scale_agents = 4096;  // full-fidelity schedule, recorded only
  int steps_per_iteration = 24;
  int epochs = 5;
  int minibatches = 4;
  double learning_rate = 1e-3;
  double lr_min = 1e-5;
  double lr_max = 1e-2;
  double max_grad_norm = 1.0;
  double reward_scale = 0.02;  // per-step rewards are multiplied by the control period

  void validate() const;
  nlohmann::json to_json() const;
  static PpoConfig from_json(const nlohmann::json& doc, const PpoConfig& base);
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Recursive GAE for one agent. `values` has one more entry than `rewards`
/// (the bootstrap value after the last step); `dones[t]` cuts the trace after t.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda);

/// In-place normalization to zero mean and unit (population) std.
void normalize(std::vector<double>& x);

/// Learning-rate adaptation from the measured KL.
double adapt_learning_rate(double lr, double kl, const PpoConfig& cfg);

/// Minibatch for the PPO loss; columns are transitions.
template <class S>
struct PpoMinibatch {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  Mat obs;
  Mat actions;
  Vec old_log_prob;
  Vec advantages;
  Vec returns;
  Mat old_mean;     // for the KL diagnostic
  Vec old_log_std;
};

struct PpoLoss {
  double total = 0.0;
  double surrogate = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double kl = 0.0;             // mean KL(old || new)
  double clip_fraction = 0.0;
};

/// Diagonal Gaussian log-density of each column of `actions`.
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> gaussian_log_prob(const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& actions,
                                                      const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& mean,
                                                      const Eigen::Matrix<S, Eigen::Dynamic, 1>& log_std) {
  constexpr double kHalfLog2Pi = 0.91893853320467274;
  const Eigen::Index n = actions.cols();
  Eigen::Matrix<S, Eigen::Dynamic, 1> out(n);
  const Eigen::Matrix<S, Eigen::Dynamic, 1> inv_var = (S(-2) * log_std.array()).exp().matrix();
  const S norm = log_std.sum() + S(kHalfLog2Pi * log_std.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto d = (actions.col(i) - mean.col(i)).array();
    out[i] = S(-0.5) * (d * d * inv_var.array()).sum() - norm;
  }
  return out;
}

/// L = -E[min(r A, clip(r) A)] + c_v E[(V - R)^2] - c_e H and, when `grad`
/// is given, its exact gradient with respect to the flat parameters.
template <class S>
PpoLoss ppo_loss(const ActorCritic<S>& net, const S* params, const PpoMinibatch<S>& mb, const PpoConfig& cfg,
                 Eigen::Matrix<S, Eigen::Dynamic, 1>* grad) {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  const Eigen::Index n = mb.obs.cols();
  const int na = net.shape().action_size;
  const S inv_n = S(1) / static_cast<S>(n);

  typename Mlp<S>::Cache actor_cache, critic_cache;
  Mat mean, value;
  net.action_mean(params, mb.obs, mean, grad ? &actor_cache : nullptr);
  net.value(params, mb.obs, value, grad ? &critic_cache : nullptr);
  const Vec log_std = net.log_std(params);
  const Vec log_prob = gaussian_log_prob<S>(mb.actions, mean, log_std);
  const Vec inv_var = (S(-2) * log_std.array()).exp().matrix();

  PpoLoss out;
  Mat d_mean = Mat::Zero(na, grad ? n : 0);
  Vec d_log_std = Vec::Zero(na);
  Mat d_value(1, grad ? n : 0);
  const S lo = S(1.0 - cfg.clip), hi = S(1.0 + cfg.clip);
  double surrogate = 0.0, value_loss = 0.0, clipped = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const S ratio = std::exp(log_prob[i] - mb.old_log_prob[i]);
    const S adv = mb.advantages[i];
    const S unclipped = ratio * adv;
    const S clipped_ratio = std::clamp(ratio, lo, hi);
    const S clipped_obj = clipped_ratio * adv;
    if (clipped_ratio != ratio) clipped += 1.0;
    const bool use_unclipped = unclipped <= clipped_obj;
    surrogate -= static_cast<double>(use_unclipped ? unclipped : clipped_obj);
    const S err = value(0, i) - mb.returns[i];
    value_loss += static_cast<double>(err * err);
    if (!grad) continue;
    // d(-r A)/d log p = -r A when the unclipped branch wins or the clip is inactive.
    const S g_logp = (use_unclipped || clipped_ratio == ratio) ? -unclipped * inv_n : S(0);
    if (g_logp != S(0)) {
      const auto diff = (mb.actions.col(i) - mean.col(i)).array();
      d_mean.col(i) = (g_logp * diff * inv_var.array()).matrix();
      d_log_std.array() += g_logp * (diff * diff * inv_var.array() - S(1));
    } else {
      d_mean.col(i).setZero();
    }
    d_value(0, i) = S(2.0 * cfg.value_coef) * err * inv_n;
  }
  out.surrogate = surrogate / n;
  out.value = value_loss / n;
  out.entropy = gaussian_entropy(log_std.template cast<double>());
  out.total = out.surrogate + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;
  out.clip_fraction = clipped / n;

  if (mb.old_mean.cols() == n && mb.old_log_std.size() == na) {
    // KL(old || new) of diagonal Gaussians, averaged over the batch.
    double kl = 0.0;
    const Vec var_old = (S(2) * mb.old_log_std.array()).exp().matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto dm = (mb.old_mean.col(i) - mean.col(i)).array();
      kl += static_cast<double>((log_std.array() - mb.old_log_std.array() +
                                 (var_old.array() + dm * dm) * S(0.5) * inv_var.array() - S(0.5))
                                    .sum());
    }
    out.kl = kl / n;
  }

  if (grad) {
    grad->setZero(net.num_params());
    d_log_std.array() -= S(cfg.entropy_coef);
    net.actor().backward(params, actor_cache, d_mean, grad->data());
    net.log_std(grad->data()) += d_log_std;
    net.critic().backward(params + net.critic_offset(), critic_cache, d_value, grad->data() + net.critic_offset());
  }
  return out;
}

template <class S>
PpoLoss ppo_loss(const ActorCritic<S>& net, const S* params, const PpoMinibatch<S>& mb, const PpoConfig& cfg) {
  return ppo_loss<S>(net, params, mb, cfg, static_cast<Eigen::Matrix<S, Eigen::Dynamic, 1>*>(nullptr));
}

/// Adam with bias correction.
template <class S>
class Adam {
 public:
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  explicit Adam(int n = 0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(Vec::Zero(n)), v_(Vec::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Vec& params, const Vec& grad, double lr) {
    ++t_;
    m_ = S(beta1_) * m_ + S(1 - beta1_) * grad;
    v_ = S(beta2_) * v_ + S(1 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    const S step = S(lr / c1);
    const S root_c2 = S(std::sqrt(c2));
    params.array() -= step * m_.array() / (v_.array().sqrt() / root_c2 + S(eps_));
  }

  long steps() const { return t_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }
  void restore(Vec m, Vec v, long t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  Vec m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Scales `grad` so that its norm is at most `max_norm`; returns the original norm.
template <class S>
double clip_grad_norm(Eigen::Matrix<S, Eigen::Dynamic, 1>& grad, double max_norm) {
  const double norm = static_cast<double>(grad.template cast<double>().norm());
  if (max_norm > 0.0 && norm > max_norm) grad *= S(max_norm / (norm + 1e-6));
  return norm;
}

}  // namespace gaitlab
