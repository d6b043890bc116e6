#pragma once

#include "ovalab/grid.hpp"
#include "ovalab/history.hpp"

#include <array>
#include <functional>
#include <vector>

namespace ovalab {

using Alpha = std::array<double, 3>;
using Vec2 = std::array<double, 2>;

struct ModeState {
    double tau = -1.0;
    Alpha alpha{};
    double S = 0.0, D = 0.0;
    Vec2 xi{};
};

// Fill S, D and xi from tau and alpha.
ModeState derive(double tau, const Alpha& alpha);

Alpha alpha_rhs(const Alpha& a);
Vec2 sd_rhs(const Vec2& sd);
// Derivative with respect to sigma = log(-tau).
Vec2 xi_rhs(double sigma, const Vec2& xi);
std::array<std::array<double, 2>, 2> xi_jacobian(const Vec2& xi);

Vec2 xi_from_sd(double tau, double S, double D);
Vec2 sd_from_xi(double tau, const Vec2& xi);

enum class ModeSystem { alpha, sd, xi };

// Optional perturbation added to the right-hand side.
using ModeNoise = std::function<std::vector<double>(double t, const std::vector<double>& y)>;

// Smooth bounded perturbation with |E| <= amplitude |alpha|^2 / |tau|^{gamma/2}
// (gamma = 1/10), deterministic for a given seed.
ModeNoise bounded_noise(double amplitude, unsigned seed);

struct Trajectory {
    ModeSystem system = ModeSystem::alpha;
    std::vector<double> t;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> dy;
    bool blew_up = false;
    double blowup_time = 0.0;

    // Cubic Hermite dense output.
    std::vector<double> at(double time) const;
};

std::vector<double> mode_rhs(ModeSystem sys, double t, const std::vector<double>& y);

// Classical RK4 from t0 to t1 with step h (t1 may be below t0).
Trajectory integrate(ModeSystem sys, const std::vector<double>& init, double t0, double t1, double h,
                     const ModeNoise& noise = nullptr);

struct FlowComparison {
    double dev_diag = 0.0;  // sup | |tau| alpha_j + 1/sqrt8 |, j = 1, 2
    double dev_cross = 0.0; // sup | tau alpha_3 |
    std::vector<ModeState> samples;
};

FlowComparison compare_with_flow(const ProfileHistory& history, const GridPtr& grid, double theta, double tau_a,
                                 double tau_b, double step = 0.05);

} // namespace ovalab
