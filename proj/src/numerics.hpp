#pragma once

// Small numerical helpers shared by the modules. Not part of the public API.

#include <array>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ovalab {

// Fornberg's algorithm: weights[k][m] is the weight of node k for the m-th
// derivative at x0.
std::vector<std::array<double, 3>> fd_weights(double x0, std::span<const double> x, int max_order);

const std::array<std::pair<double, double>, 8>& gauss_legendre_8();

// C^2 quintic step: 0 for s <= 0, 1 for s >= 1.
double smoothstep5(double s);
double smoothstep5_deriv(double s);

// Four-point Lagrange interpolation at x through (xs[k], fs[k]).
double lagrange4(double x, const double* xs, const double* fs);

// Periodic cubic (Catmull-Rom style Lagrange) interpolation of uniformly spaced
// samples f[0..n) with period n at fractional index s.
double periodic_cubic(std::span<const double> f, double s);

// Monotone piecewise cubic Hermite interpolant.
class Pchip {
public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> f);
    double operator()(double x) const;
    double deriv(double x) const;
    const std::vector<double>& x() const { return x_; }

private:
    std::vector<double> x_, f_, d_;
};

// Brent's method on a bracketing interval; returns the root.
double brent(const std::function<double(double)>& f, double a, double b, double tol = 1e-14, int max_iter = 200);

} // namespace ovalab
