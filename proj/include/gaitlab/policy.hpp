#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gaitlab/mlp.hpp"

namespace gaitlab {

inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 1.0;

struct NetworkShape {
  int obs_size = 38;
  int action_size = 10;
  std::vector<int> hidden{512, 256, 128};
  double init_log_std = 0.0;

  nlohmann::json to_json() const {
    return {{"obs_size", obs_size}, {"action_size", action_size}, {"hidden", hidden}, {"init_log_std", init_log_std}};
  }
  static NetworkShape from_json(const nlohmann::json& j) {
    NetworkShape s;
    s.obs_size = j.at("obs_size").get<int>();
    s.action_size = j.at("action_size").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.init_log_std = j.at("init_log_std").get<double>();
    return s;
  }
};

/// Gaussian actor (state-independent log-std) and a value critic sharing one
/// flat parameter vector: [actor | log_std | critic].
template <class S>
class ActorCritic {
 public:
  using Mat = typename Mlp<S>::Mat;
  using Vec = typename Mlp<S>::Vec;

  ActorCritic() = default;
  explicit ActorCritic(NetworkShape shape) : shape_(std::move(shape)) {
    std::vector<int> a{shape_.obs_size}, c{shape_.obs_size};
    for (int h : shape_.hidden) {
      a.push_back(h);
      c.push_back(h);
    }
    a.push_back(shape_.action_size);
    c.push_back(1);
    actor_ = Mlp<S>(a);
    critic_ = Mlp<S>(c);
    params_ = Vec::Zero(num_params());
    log_std(params_.data()).setConstant(static_cast<S>(shape_.init_log_std));
  }

  const NetworkShape& shape() const { return shape_; }
  const Mlp<S>& actor() const { return actor_; }
  const Mlp<S>& critic() const { return critic_; }
  int num_params() const { return actor_.num_params() + shape_.action_size + critic_.num_params(); }
  int log_std_offset() const { return actor_.num_params(); }
  int critic_offset() const { return actor_.num_params() + shape_.action_size; }

  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  Eigen::Map<Vec> log_std(S* p) const { return Eigen::Map<Vec>(p + log_std_offset(), shape_.action_size); }
  Eigen::Map<const Vec> log_std(const S* p) const {
    return Eigen::Map<const Vec>(p + log_std_offset(), shape_.action_size);
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    actor_.init(params_.data(), rng, 0.01 * std::sqrt(3.0));
    critic_.init(params_.data() + critic_offset(), rng, std::sqrt(3.0));
    log_std(params_.data()).setConstant(static_cast<S>(shape_.init_log_std));
  }

  /// Keeps log-std inside its allowed band.
  void clamp_log_std() {
    auto ls = log_std(params_.data());
    ls = ls.cwiseMax(S(kLogStdMin)).cwiseMin(S(kLogStdMax));
  }

  void action_mean(const S* p, const Mat& obs, Mat& mean, typename Mlp<S>::Cache* cache = nullptr) const {
    check(obs);
    actor_.forward(p, obs, mean, cache);
  }
  void value(const S* p, const Mat& obs, Mat& v, typename Mlp<S>::Cache* cache = nullptr) const {
    check(obs);
    critic_.forward(p + critic_offset(), obs, v, cache);
  }
  void action_mean(const Mat& obs, Mat& mean) const { action_mean(params_.data(), obs, mean); }
  void value(const Mat& obs, Mat& v) const { value(params_.data(), obs, v); }

 private:
  void check(const Mat& obs) const {
    if (obs.rows() != shape_.obs_size) throw ContractError("observation has the wrong length");
    if (!obs.allFinite()) throw ContractError("observation must be finite");
  }

  NetworkShape shape_;
  Mlp<S> actor_;
  Mlp<S> critic_;
  Vec params_;
};

/// Entropy of a diagonal Gaussian with the given log-stds.
inline double gaussian_entropy(const Eigen::VectorXd& log_std) {
  constexpr double kHalfLog2PiE = 1.4189385332046727;  // 0.5 * log(2 pi e)
  return log_std.sum() + kHalfLog2PiE * static_cast<double>(log_std.size());
}

}  // namespace gaitlab
