#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace gaitlab {

/// Separable CMA-ES (diagonal covariance, rank-one + rank-mu updates).
/// Minimizes; deterministic for a given seed. Use ask() / tell() in turn.
class SepCmaEs {
 public:
  /// `scale` sets the per-coordinate initial standard deviation (relative to sigma).
  SepCmaEs(Eigen::VectorXd mean, Eigen::VectorXd scale, double sigma, int lambda, std::uint64_t seed);

  const std::vector<Eigen::VectorXd>& ask();
  void tell(const std::vector<double>& fitness);

  const Eigen::VectorXd& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  int lambda() const { return lambda_; }
  int generation() const { return generation_; }
  /// lambda default 4 + floor(3 ln n).
  static int default_lambda(int n);

 private:
  int n_;
  int lambda_;
  int mu_;
  Eigen::VectorXd weights_;
  double mueff_, cs_, ds_, cc_, c1_, cmu_, chi_n_;
  Eigen::VectorXd mean_, diag_c_, ps_, pc_;
  double sigma_;
  int generation_ = 0;
  std::mt19937_64 rng_;
  std::vector<Eigen::VectorXd> population_;
  std::vector<Eigen::VectorXd> steps_;  // y = sqrt(C) z for each sample
};

}  // namespace gaitlab
