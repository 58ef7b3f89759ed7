#include "gaitlab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace gaitlab {

PpoTrainer::PpoTrainer(VecEnv& envs, PpoConfig cfg, NetworkShape shape, std::uint64_t seed)
    : envs_(envs), cfg_(std::move(cfg)), net_(shape), lr_(cfg_.learning_rate), rng_(seed) {
  cfg_.validate();
  if (shape.obs_size != envs_.obs_size() || shape.action_size != envs_.action_size())
    throw ConfigError("network shape does not match the environment");
  net_.init(seed);
  adam_ = Adam<float>(net_.num_params());
  obs_ = envs_.reset(seed);
}

void PpoTrainer::collect() {
  const int n = envs_.num_envs();
  const int steps = cfg_.steps_per_iteration;
  const int total = n * steps;
  const int na = envs_.action_size();
  b_obs_.resize(envs_.obs_size(), total);
  b_actions_.resize(na, total);
  b_mean_.resize(na, total);
  b_log_prob_.resize(total);
  b_values_.resize(total);
  b_rewards_.assign(total, 0.0);
  b_dones_.assign(total, false);
  rollout_reward_ = 0.0;

  const Eigen::VectorXf log_std = net_.log_std(net_.params().data());
  const Eigen::VectorXf std_dev = log_std.array().exp().matrix();
  std::normal_distribution<double> normal(0.0, 1.0);
  VecStep out;
  Eigen::MatrixXf mean, value;
  for (int t = 0; t < steps; ++t) {
    const Eigen::MatrixXf obs = obs_.cast<float>();
    net_.action_mean(obs, mean);
    net_.value(obs, value);
    Eigen::MatrixXf actions(na, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < na; ++k) actions(k, i) = mean(k, i) + std_dev[k] * static_cast<float>(normal(rng_));
    const Eigen::VectorXf log_prob = gaussian_log_prob<float>(actions, mean, log_std);
    const int col = t * n;
    b_obs_.middleCols(col, n) = obs;
    b_actions_.middleCols(col, n) = actions;
    b_mean_.middleCols(col, n) = mean;
    b_log_prob_.segment(col, n) = log_prob;
    b_values_.segment(col, n) = value.row(0).transpose();

    envs_.step(actions.cast<double>(), out);

    // Time-outs are not failures: bootstrap them with the value of the state reached.
    std::vector<int> timed_out;
    for (int i = 0; i < n; ++i)
      if (out.timeouts[i]) timed_out.push_back(i);
    Eigen::MatrixXf boot_value;
    if (!timed_out.empty()) {
      Eigen::MatrixXf term(envs_.obs_size(), static_cast<Eigen::Index>(timed_out.size()));
      for (size_t k = 0; k < timed_out.size(); ++k) term.col(k) = out.terminal_obs.col(timed_out[k]).cast<float>();
      net_.value(term, boot_value);
    }
    for (int i = 0; i < n; ++i) {
      b_rewards_[col + i] = cfg_.reward_scale * out.rewards[i];
      b_dones_[col + i] = out.dones[i] != 0;
      rollout_reward_ += out.rewards[i];
    }
    for (size_t k = 0; k < timed_out.size(); ++k)
      b_rewards_[col + timed_out[k]] += cfg_.gamma * static_cast<double>(boot_value(0, k));
    for (auto& rec : out.finished) {
      window_.push_back(std::move(rec));
      if (static_cast<int>(window_.size()) > kEpisodeWindow) window_.pop_front();
    }
    obs_ = out.obs;
  }
  Eigen::MatrixXf last;
  net_.value(obs_.cast<float>(), last);
  last_values_ = last.row(0).transpose();
  rollout_reward_ /= total;
}

void PpoTrainer::update(IterationLog& log) {
  const int n = envs_.num_envs();
  const int steps = cfg_.steps_per_iteration;
  const int total = n * steps;

  std::vector<double> adv(total), ret(total);
  {
    std::vector<double> r(steps), v(steps + 1);
    std::vector<bool> d(steps);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < steps; ++t) {
        r[t] = b_rewards_[t * n + i];
        v[t] = b_values_[t * n + i];
        d[t] = b_dones_[t * n + i];
      }
      v[steps] = last_values_[i];
      const GaeResult g = compute_gae(r, v, d, cfg_.gamma, cfg_.lambda);
      for (int t = 0; t < steps; ++t) {
        adv[t * n + i] = g.advantages[t];
        ret[t * n + i] = g.returns[t];
      }
    }
  }
  normalize(adv);

  const Eigen::VectorXf last_good = net_.params();
  const Eigen::VectorXf old_log_std = net_.log_std(net_.params().data());
  const int mb_size = total / cfg_.minibatches;
  std::vector<int> perm(total);
  Eigen::VectorXf grad;
  int updates = 0;
  double kl = 0.0, surr = 0.0, vloss = 0.0, ent = 0.0, clipf = 0.0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng_);
    for (int m = 0; m < cfg_.minibatches; ++m) {
      PpoMinibatch<float> mb;
      mb.obs.resize(b_obs_.rows(), mb_size);
      mb.actions.resize(b_actions_.rows(), mb_size);
      mb.old_mean.resize(b_mean_.rows(), mb_size);
      mb.old_log_prob.resize(mb_size);
      mb.advantages.resize(mb_size);
      mb.returns.resize(mb_size);
      for (int k = 0; k < mb_size; ++k) {
        const int c = perm[m * mb_size + k];
        mb.obs.col(k) = b_obs_.col(c);
        mb.actions.col(k) = b_actions_.col(c);
        mb.old_mean.col(k) = b_mean_.col(c);
        mb.old_log_prob[k] = b_log_prob_[c];
        mb.advantages[k] = static_cast<float>(adv[c]);
        mb.returns[k] = static_cast<float>(ret[c]);
      }
      mb.old_log_std = old_log_std;
      const PpoLoss loss = ppo_loss<float>(net_, net_.params().data(), mb, cfg_, &grad);
      if (!std::isfinite(loss.total) || !grad.allFinite())
        throw TrainingDiverged("PPO loss became non-finite at iteration " + std::to_string(iteration_ + 1),
                               last_good, iteration_);
      lr_ = adapt_learning_rate(lr_, loss.kl, cfg_);
      clip_grad_norm(grad, cfg_.max_grad_norm);
      adam_.step(net_.params(), grad, lr_);
      net_.clamp_log_std();
      ++updates;
      kl += loss.kl;
      surr += loss.surrogate;
      vloss += loss.value;
      ent += loss.entropy;
      clipf += loss.clip_fraction;
    }
  }
  if (!net_.params().allFinite())
    throw TrainingDiverged("parameters became non-finite at iteration " + std::to_string(iteration_ + 1), last_good,
                           iteration_);
  log.kl = kl / updates;
  log.surrogate = surr / updates;
  log.value_loss = vloss / updates;
  log.entropy = ent / updates;
  log.clip_fraction = clipf / updates;
}

IterationLog PpoTrainer::iterate() {
  const auto t0 = std::chrono::steady_clock::now();
  IterationLog log;
  collect();
  update(log);
  ++iteration_;
  log.iteration = iteration_;
  log.learning_rate = lr_;
  log.mean_step_reward = rollout_reward_;
  log.episodes = static_cast<int>(window_.size());
  log.term_means.assign(envs_.term_names().size(), 0.0);
  int falls = 0;
  for (const auto& rec : window_) {
    log.mean_episode_length += rec.length;
    falls += rec.fell ? 1 : 0;
    for (size_t k = 0; k < rec.term_means.size() && k < log.term_means.size(); ++k)
      log.term_means[k] += rec.term_means[k];
  }
  if (!window_.empty()) {
    log.mean_episode_length /= window_.size();
    log.fall_rate = static_cast<double>(falls) / window_.size();
    for (double& v : log.term_means) v /= window_.size();
  }
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

}  // namespace gaitlab
