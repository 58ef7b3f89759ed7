#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gaitlab/errors.hpp"
#include "gaitlab/policy.hpp"
#include "gaitlab/ppo.hpp"
#include "gaitlab/vec_env.hpp"

namespace gaitlab {

struct IterationLog {
  int iteration = 0;
  double mean_episode_length = 0.0;  // s, over the recent-episode window
  int episodes = 0;                  // episodes in the window
  double fall_rate = 0.0;            // fraction of windowed episodes ended by a fall
  std::vector<double> term_means;    // per-episode means, window average
  double mean_step_reward = 0.0;     // unscaled, this iteration's rollout
  double kl = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double learning_rate = 0.0;
  double clip_fraction = 0.0;
  double seconds = 0.0;              // wall time of the iteration (not logged to files)
};

/// Raised when a loss or gradient turns non-finite. Carries the last
/// parameters that produced a finite update.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, Eigen::VectorXf last_good, int iteration)
      : Error(what), last_good_(std::move(last_good)), iteration_(iteration) {}
  const Eigen::VectorXf& last_good() const { return last_good_; }
  int iteration() const { return iteration_; }

 private:
  Eigen::VectorXf last_good_;
  int iteration_;
};

/// Collect -> GAE -> minibatch epochs, with a KL-adaptive learning rate.
class PpoTrainer {
 public:
  PpoTrainer(VecEnv& envs, PpoConfig cfg, NetworkShape shape, std::uint64_t seed);

  IterationLog iterate();
  int iteration() const { return iteration_; }
  ActorCritic<float>& policy() { return net_; }
  const ActorCritic<float>& policy() const { return net_; }
  double learning_rate() const { return lr_; }
  const PpoConfig& config() const { return cfg_; }
  /// Window of recent episodes used for logging.
  static constexpr int kEpisodeWindow = 100;

 private:
  void collect();
  void update(IterationLog& log);

  VecEnv& envs_;
  PpoConfig cfg_;
  ActorCritic<float> net_;
  Adam<float> adam_;
  double lr_;
  std::mt19937_64 rng_;
  int iteration_ = 0;
  Eigen::MatrixXd obs_;
  std::deque<EpisodeRecord> window_;
  // Rollout storage, column t * N + i.
  Eigen::MatrixXf b_obs_, b_actions_, b_mean_;
  Eigen::VectorXf b_log_prob_, b_values_;
  std::vector<double> b_rewards_;
  std::vector<bool> b_dones_;
  Eigen::VectorXf last_values_;
  double rollout_reward_ = 0.0;
};

}  // namespace gaitlab
