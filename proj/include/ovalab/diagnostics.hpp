#pragma once

#include "ovalab/evolve.hpp"
#include "ovalab/grid.hpp"
#include "ovalab/shrinkers.hpp"

#include <functional>
#include <vector>

namespace ovalab {

// Distances of a renormalized slice to the three model profiles.
struct AsymptoticsReport {
    double parabolic = 0.0;    // |tau| sup_{y <= 1/eps} |v - sqrt2 + (y^2-4)/(sqrt8 |tau|)|
    double intermediate = 0.0; // sup_{z <= sqrt2 - eps} |v(|tau|^{1/2} z) - sqrt(2 - z^2)|
    double tip = 0.0;          // sup_{rho <= 1/eps} |Z - Z_B|
};

// The slice is given by its signed square q (continued past the rim), the tip
// patch may be empty, in which case the tip distance is reported as NaN.
AsymptoticsReport asymptotics_report(const ScalarField& q, const TipField& tip, double tau, double eps,
                                     const BowlProfile& bowl);
AsymptoticsReport asymptotics_report(const FlowState& s, double eps, const BowlProfile& bowl);

struct ConcavityReport {
    double max_margin = 0.0;
    int worst_i = -1, worst_j = -1;
    double worst_y = 0.0, worst_phi = 0.0;
    double delta = 0.0;
    ScalarField margin; // NaN outside the body
};

// Largest eigenvalue of M - (gamma + delta) g relative to g, where
// M_ij = Q_ij - Gamma^k_ij Q_k, Q = V^2 and g_ij = delta_ij + V_i V_j, with
// gamma = ((-t)/log(-t))^{3/2} V^{-3}. V is an unrescaled slice at time t <= -e.
ConcavityReport concavity_margin(const ScalarField& V, double t, double delta);
// Same from the signed square of a renormalized slice at tau <= -1 (the
// margin is invariant under the parabolic rescaling).
ConcavityReport concavity_margin_renormalized(const ScalarField& q, double tau, double delta);

struct CollarReport {
    double deviation = 0.0;
    double y = 0.0, phi = 0.0;
    int nodes = 0;
    double v_lo = 0.0, v_hi = 0.0;
};

// sup of |y (v^2)_y + 4| over the nodes with L/sqrt|tau| <= v <= 2 theta.
CollarReport collar_deviation(const ScalarField& q, double tau, double theta, double L);
// Same over the nodes with y_lo <= y <= y_hi inside the body.
CollarReport collar_deviation_band(const ScalarField& q, double y_lo, double y_hi);

// max of |v^{k+l-1} y^{-k} d_phi^k d_y^l v| for 1 <= k + l <= 2 over the
// nodes with v >= L/sqrt|tau| (and y > 0).
double cylindrical_estimate(const ScalarField& q, double tau, double L);

// Gaussian area (4 pi)^{-3/2} \int e^{-(|y|^2+v^2)/4} 2 pi v sqrt(1+|Dv|^2) dy of a
// renormalized slice given by its signed square.
double huisken_renormalized(const ScalarField& q);
// Theta(r) for the unrescaled slice V at time t = -r^2, given on a polar grid
// in x. Directions leaving the grid are closed with the Gaussian tail of the
// outermost ring.
double huisken_density(const ScalarField& V, double r);

struct WeightField {
    int n_v = 0, n_phi = 0;
    double v_top = 0.0, theta = 0.0, tau = 0.0;
    std::vector<double> mu; // index k * n_phi + j; -inf at v = 0
    double v(int k) const { return v_top * k / n_v; }
    double at(int k, int j) const { return mu[static_cast<size_t>(k) * n_phi + j]; }
};

// Cutoff of the tip weight: 0 for v <= theta/8, 1 for v >= theta/4.
double tip_cutoff(double v, double theta);

// mu(v) = -Y(theta)^2/4 + \int_v^theta [zeta (Y^2/4)_v - (1 - zeta)(1 + Y_{B,v}^2)/v] dv
// by the composite trapezoid rule on the tip nodes.
WeightField tip_weight(const TipField& Y, double tau, double theta, const BowlProfile& bowl);

// |tau| \int F^2 e^mu dv / \int F_v^2/(1+Y_v^2) e^mu dv along every ray; returns
// the largest value over the rays. F must satisfy F'(0) = 0 and F(2 theta) = 0.
double poincare_check(const std::function<double(double)>& F, const WeightField& mu, const TipField& Y, double tau);

} // namespace ovalab
