#include "gaitlab/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gaitlab/errors.hpp"

namespace gaitlab {

int SepCmaEs::default_lambda(int n) { return 4 + static_cast<int>(std::floor(3.0 * std::log(n))); }

SepCmaEs::SepCmaEs(Eigen::VectorXd mean, Eigen::VectorXd scale, double sigma, int lambda, std::uint64_t seed)
    : n_(static_cast<int>(mean.size())), mean_(std::move(mean)), sigma_(sigma), rng_(seed) {
  if (n_ < 1) throw ContractError("CMA-ES needs at least one variable");
  if (scale.size() != n_) throw ContractError("CMA-ES scale length mismatch");
  lambda_ = lambda > 1 ? lambda : default_lambda(n_);
  mu_ = lambda_ / 2;
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i) weights_[i] = std::log(mu_ + 0.5) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mueff_ = 1.0 / weights_.squaredNorm();
  const double n = n_;
  cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
  ds_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
  cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
  // Diagonal learning rates are raised by (n + 2) / 3.
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
  const double boost = (n + 2.0) / 3.0;
  c1_ = std::min(1.0, c1 * boost);
  cmu_ = std::min(1.0 - c1_, cmu * boost);
  chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  diag_c_ = scale.array().square();
  ps_ = Eigen::VectorXd::Zero(n_);
  pc_ = Eigen::VectorXd::Zero(n_);
}

const std::vector<Eigen::VectorXd>& SepCmaEs::ask() {
  std::normal_distribution<double> normal(0.0, 1.0);
  population_.assign(lambda_, Eigen::VectorXd());
  steps_.assign(lambda_, Eigen::VectorXd());
  const Eigen::VectorXd sd = diag_c_.cwiseSqrt();
  for (int k = 0; k < lambda_; ++k) {
    Eigen::VectorXd z(n_);
    for (int i = 0; i < n_; ++i) z[i] = normal(rng_);
    steps_[k] = sd.cwiseProduct(z);
    population_[k] = mean_ + sigma_ * steps_[k];
  }
  return population_;
}

void SepCmaEs::tell(const std::vector<double>& fitness) {
  if (static_cast<int>(fitness.size()) != lambda_) throw ContractError("CMA-ES fitness count mismatch");
  std::vector<int> order(lambda_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fitness[a] < fitness[b]; });

  Eigen::VectorXd yw = Eigen::VectorXd::Zero(n_);
  for (int i = 0; i < mu_; ++i) yw += weights_[i] * steps_[order[i]];
  mean_ += sigma_ * yw;

  const Eigen::VectorXd inv_sd = diag_c_.cwiseSqrt().cwiseInverse();
  ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * inv_sd.cwiseProduct(yw);
  ++generation_;
  const double ps_norm = ps_.norm();
  const double hs_denom = std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * generation_));
  const bool hsig = ps_norm / hs_denom < (1.4 + 2.0 / (n_ + 1.0)) * chi_n_;
  pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * yw;

  Eigen::VectorXd rank_mu = Eigen::VectorXd::Zero(n_);
  for (int i = 0; i < mu_; ++i) rank_mu += weights_[i] * steps_[order[i]].array().square().matrix();
  const double delta = hsig ? 0.0 : cc_ * (2.0 - cc_);
  diag_c_ = (1.0 - c1_ - cmu_) * diag_c_ + c1_ * (pc_.array().square().matrix() + delta * diag_c_) + cmu_ * rank_mu;

  sigma_ *= std::exp(std::min(1.0, (cs_ / ds_) * (ps_norm / chi_n_ - 1.0)));
}

}  // namespace gaitlab
