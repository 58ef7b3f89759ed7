#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gaitlab/env.hpp"
#include "gaitlab/rewards.hpp"

namespace gaitlab {

/// Summary of one finished episode.
struct EpisodeRecord {
  int env = 0;
  double length = 0.0;  // s
  bool fell = false;
  std::vector<double> term_means;  // per-step mean of each logged term
};

struct VecStep {
  Eigen::MatrixXd obs;           // next observations (after automatic resets)
  std::vector<double> rewards;   // unscaled per-step totals
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> timeouts;
  Eigen::MatrixXd terminal_obs;  // observation before the reset, for time-out bootstrapping
  std::vector<EpisodeRecord> finished;  // in env order
};

/// Batch of independent environments stepped together, with automatic reset.
class VecEnv {
 public:
  virtual ~VecEnv() = default;
  virtual int num_envs() const = 0;
  virtual int obs_size() const = 0;
  virtual int action_size() const = 0;
  /// Names of the per-episode terms reported in EpisodeRecord::term_means.
  virtual std::vector<std::string> term_names() const = 0;
  virtual Eigen::MatrixXd reset(std::uint64_t seed) = 0;
  virtual void step(const Eigen::MatrixXd& actions, VecStep& out) = 0;
};

/// Per-episode reset seed derived from the run seed, agent and episode index.
std::uint64_t episode_seed(std::uint64_t base, int env, std::uint64_t episode);

class BipedVecEnv : public VecEnv {
 public:
  BipedVecEnv(int n, std::shared_ptr<const RobotModel> model, std::shared_ptr<const GaitLibrary> library,
              const RewardConfig& rewards, const EpisodeConfig& episode, int workers = 1);

  int num_envs() const override { return static_cast<int>(envs_.size()); }
  int obs_size() const override { return obs::kSize; }
  int action_size() const override { return envs_.front().action_size(); }
  std::vector<std::string> term_names() const override;
  /// Resets every agent and staggers their episode clocks.
  Eigen::MatrixXd reset(std::uint64_t seed) override;
  void step(const Eigen::MatrixXd& actions, VecStep& out) override;

  BipedEnv& env(int i) { return envs_[i]; }

 private:
  std::vector<BipedEnv> envs_;
  std::vector<EpisodeRewardMeans> means_;
  std::vector<std::uint64_t> episodes_;
  std::uint64_t seed_ = 0;
  int workers_ = 1;
};

/// 1-D velocity-tracking sanity task: a unit mass driven by an acceleration
/// command must hold a sampled target velocity. Observation (velocity,
/// command, previous action); reward exp(-|v - c| / 0.25).
class DoubleIntegratorVecEnv : public VecEnv {
 public:
  struct Config {
    double dt = 0.02;
    double accel_gain = 4.0;   // m/s^2 per unit action
    double command_lo = 0.2;
    double command_hi = 1.0;
    int episode_steps = 100;
  };
  DoubleIntegratorVecEnv(int n, Config cfg);
  explicit DoubleIntegratorVecEnv(int n) : DoubleIntegratorVecEnv(n, Config{}) {}

  int num_envs() const override { return static_cast<int>(v_.size()); }
  int obs_size() const override { return 3; }
  int action_size() const override { return 1; }
  std::vector<std::string> term_names() const override { return {"tracking", "abs_error"}; }
  Eigen::MatrixXd reset(std::uint64_t seed) override;
  void step(const Eigen::MatrixXd& actions, VecStep& out) override;

  /// Mean |v - c| / c over the second half of deterministic episodes.
  template <class Policy>
  double relative_tracking_error(Policy&& policy, int episodes, std::uint64_t seed) const;

  const Config& config() const { return cfg_; }

 private:
  void reset_one(int i);
  Eigen::VectorXd observe(int i) const;

  Config cfg_;
  std::vector<double> v_, c_, prev_;
  std::vector<int> t_;
  std::vector<double> sum_reward_, sum_err_;
  std::vector<std::uint64_t> episodes_;
  std::uint64_t seed_ = 0;
};

template <class Policy>
double DoubleIntegratorVecEnv::relative_tracking_error(Policy&& policy, int episodes, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cmd(cfg_.command_lo, cfg_.command_hi);
  double total = 0.0;
  int count = 0;
  for (int e = 0; e < episodes; ++e) {
    const double c = cmd(rng);
    double v = 0.0, prev = 0.0;
    for (int t = 0; t < cfg_.episode_steps; ++t) {
      Eigen::VectorXd o(3);
      o << v, c, prev;
      const double a = std::clamp(static_cast<double>(policy(o)), -1.0, 1.0);
      v += cfg_.accel_gain * a * cfg_.dt;
      prev = a;
      if (t >= cfg_.episode_steps / 2) {
        total += std::abs(v - c) / c;
        ++count;
      }
    }
  }
  return count ? total / count : 0.0;
}

}  // namespace gaitlab
