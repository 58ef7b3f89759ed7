#include "gaitlab/bezier.hpp"

#include <cmath>

namespace gaitlab {

namespace {
double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}
}  // namespace

double bernstein(int n, int k, double s) {
  return binomial(n, k) * ipow(s, k) * ipow(1.0 - s, n - k);
}

double bezier(std::span<const double> alpha, double s) {
  const int n = static_cast<int>(alpha.size()) - 1;
  double v = 0.0;
  for (int k = 0; k <= n; ++k) v += alpha[k] * bernstein(n, k, s);
  return v;
}

double bezier_derivative(std::span<const double> alpha, double s) {
  const int n = static_cast<int>(alpha.size()) - 1;
  if (n < 1) return 0.0;
  double v = 0.0;
  for (int k = 0; k < n; ++k) v += (alpha[k + 1] - alpha[k]) * bernstein(n - 1, k, s);
  return n * v;
}

}  // namespace gaitlab
