#pragma once

#include <span>

namespace gaitlab {

/// Bernstein basis polynomial B_{k,n}(s).
double bernstein(int n, int k, double s);

/// Bezier curve sum_k alpha_k B_{k,n}(s) with n = alpha.size() - 1.
double bezier(std::span<const double> alpha, double s);
/// d/ds of the curve.
double bezier_derivative(std::span<const double> alpha, double s);

}  // namespace gaitlab
