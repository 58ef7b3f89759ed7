#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "gaitlab/errors.hpp"

namespace gaitlab {

/// Fully connected network with ELU hidden layers and a linear output.
/// Parameters live in a caller-owned flat buffer: for each layer the weight
/// matrix (out x in, column-major) followed by the bias. Batches are columns.
template <class S>
class Mlp {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using CMap = Eigen::Map<const Mat>;
  using MapM = Eigen::Map<Mat>;

  struct Cache {
    std::vector<Mat> act;  // act[0] = input, act[l + 1] = output of layer l
    std::vector<Mat> pre;  // pre-activation of each layer
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ContractError("network needs at least an input and an output size");
    int off = 0;
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_off_.push_back(off);
      off += sizes_[l + 1] * sizes_[l];
      b_off_.push_back(off);
      off += sizes_[l + 1];
    }
    num_params_ = off;
  }

  int num_params() const { return num_params_; }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }

  CMap weight(const S* p, int l) const { return CMap(p + w_off_[l], sizes_[l + 1], sizes_[l]); }
  MapM weight(S* p, int l) const { return MapM(p + w_off_[l], sizes_[l + 1], sizes_[l]); }
  Eigen::Map<const Vec> bias(const S* p, int l) const { return Eigen::Map<const Vec>(p + b_off_[l], sizes_[l + 1]); }
  Eigen::Map<Vec> bias(S* p, int l) const { return Eigen::Map<Vec>(p + b_off_[l], sizes_[l + 1]); }

  /// Weights ~ U(-g/sqrt(fan_in), g/sqrt(fan_in)) with g = sqrt(3) on hidden
  /// layers and `output_gain` on the last one; zero biases.
  void init(S* p, std::mt19937_64& rng, double output_gain) const {
    for (int l = 0; l < num_layers(); ++l) {
      const double bound = (l + 1 == num_layers() ? output_gain : std::sqrt(3.0)) / std::sqrt(double(sizes_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      auto w = weight(p, l);
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<S>(u(rng));
      bias(p, l).setZero();
    }
  }

  void forward(const S* p, const Mat& x, Mat& out, Cache* cache = nullptr) const {
    if (x.rows() != input_size()) throw ContractError("network input has the wrong size");
    Mat h = x;
    if (cache) {
      cache->act.assign(num_layers() + 1, Mat());
      cache->pre.assign(num_layers(), Mat());
      cache->act[0] = x;
    }
    for (int l = 0; l < num_layers(); ++l) {
      Mat z = weight(p, l) * h;
      z.colwise() += bias(p, l);
      if (l + 1 < num_layers()) {
        if (cache) cache->pre[l] = z;
        h = z.unaryExpr([](S v) { return v > S(0) ? v : S(std::expm1(v)); });
      } else {
        h = std::move(z);
      }
      if (cache) cache->act[l + 1] = h;
    }
    out = std::move(h);
  }

  /// Accumulates dL/dparams into `grad` given dL/dout for the cached batch.
  void backward(const S* p, const Cache& cache, const Mat& dout, S* grad) const {
    Mat delta = dout;
    for (int l = num_layers() - 1; l >= 0; --l) {
      if (l + 1 < num_layers()) {
        // ELU derivative: 1 for z > 0, exp(z) = elu(z) + 1 otherwise.
        const Mat& z = cache.pre[l];
        const Mat& a = cache.act[l + 1];
        delta = delta.cwiseProduct(
            z.binaryExpr(a, [](S zv, S av) { return zv > S(0) ? S(1) : av + S(1); }));
      }
      weight(grad, l).noalias() += delta * cache.act[l].transpose();
      bias(grad, l) += delta.rowwise().sum();
      if (l > 0) delta = weight(p, l).transpose() * delta;
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<int> w_off_, b_off_;
  int num_params_ = 0;
};

}  // namespace gaitlab
