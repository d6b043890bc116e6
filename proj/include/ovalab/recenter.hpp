#pragma once

#include "ovalab/grid.hpp"
#include "ovalab/history.hpp"

#include <array>
#include <cstdint>

namespace ovalab {

// Space-time change of frame of an unrescaled flow:
//   M'_t = R_phi (e^{gamma/2} M_{e^{-gamma}(t - beta)} + alpha).
// The renormalized profiles are then related by
//   v'(y, tau) = (1+b) v((R_{-phi} y - a)/(1+b), (1+Gamma) tau)
// with the tau-dependent derived parameters below.
struct TransformParams {
    std::array<double, 2> alpha{};
    double beta = 0.0;
    double gamma = 0.0;
    double phi = 0.0;

    double b(double tau) const;
    double Gamma(double tau) const;
    std::array<double, 2> a(double tau) const;
    // Original renormalized time seen at tau: (1 + Gamma) tau.
    double source_tau(double tau) const;
    // Inverse of source_tau.
    double target_tau(double source) const;

    static TransformParams from_derived(double b, double Gamma, double tau, std::array<double, 2> a = {},
                                        double phi = 0.0);
    // The transformation undoing this one (translation and rotation included).
    TransformParams inverse() const;
    // First this, then `next`.
    TransformParams then(const TransformParams& next) const;
};

// Lazily transformed view of a history.
class TransformedHistory : public ProfileHistory {
public:
    TransformedHistory(HistoryPtr base, TransformParams p);
    double tau_min() const override { return lo_; }
    double tau_max() const override { return hi_; }
    double value(double y1, double y2, double tau) const override;
    const TransformParams& params() const { return p_; }

private:
    HistoryPtr base_;
    TransformParams p_;
    double lo_, hi_;
};

// (1+b) v(y/(1+b), (1+Gamma) tau0) sampled on grid.
ScalarField transform_profile(const ProfileHistory& h, double b, double Gamma, double tau0, const GridPtr& grid);

struct TransformedField {
    ScalarField v;
    bool clamped = false; // some source points fell outside the grid
};
TransformedField transform_full(const ProfileHistory& h, std::array<double, 2> a, double b, double Gamma,
                                double phi, double tau0, const GridPtr& grid);

struct PsiOptions {
    double theta = 0.2; // truncation v_C = chi(v) v
};

// (<1, v_C - sqrt2>, <y^2 - 4, v_C + (y^2-4)/(sqrt8 |tau0|)>) for the transformed profile.
std::array<double, 2> psi2(const ProfileHistory& h, double tau0, double b, double Gamma, const GridPtr& grid,
                           const PsiOptions& opt = {});
// The same with the translation pairings <y cos, v_C>, <y sin, v_C> in the middle.
std::array<double, 4> psi4(const ProfileHistory& h, double tau0, std::array<double, 2> a, double b, double Gamma,
                           const GridPtr& grid, const PsiOptions& opt = {});

// Determinant of the central-difference Jacobian of psi2 in (b, Gamma).
double jacobian_det(const ProfileHistory& h, double tau0, double b, double Gamma, const GridPtr& grid,
                    const PsiOptions& opt = {}, double step = 1e-5);

enum class SolveMode { two_param, four_param };

struct SolveOptions {
    SolveMode mode = SolveMode::two_param;
    double kappa = 1.0; // search box |tau0|^2 b^2 + Gamma^2 <= 100 kappa^2
    double tol = 1e-10;
    int max_iter = 50;
    int starts = 20; // additional random starts if the first Newton run fails
    double fd_step = 1e-6;
    std::uint64_t seed = 1;
    PsiOptions psi;
};

struct SolveResult {
    TransformParams params; // raw parameters, relative to tau0
    double tau0 = 0.0;
    std::array<double, 2> a{};
    double b = 0.0, Gamma = 0.0;
    double phi = 0.0;
    double residual = 0.0;
    double jacobian_det = 0.0;
    int iterations = 0;
    int start = 0; // index of the start that converged (0 = origin)
};

// Newton search for the zero of psi2 (or psi4) from the origin, then from
// random points of the search box. In four-parameter mode the rotation is the
// half-angle zeroing <v_C, y^2 sin 2phi> with <v_C, y^2 cos 2phi> >= 0.
SolveResult solve_psi(const ProfileHistory& h, double tau0, const GridPtr& grid, const SolveOptions& opt = {});
// Newton from one given start (b, Gamma) or (a1, a2, b, Gamma).
SolveResult solve_psi_from(const ProfileHistory& h, double tau0, const GridPtr& grid, const std::vector<double>& start,
                           const SolveOptions& opt = {});

// Rotation half-angle for a profile: zeroes <f(R_{-phi} .), y^2 sin 2phi>.
double rotation_angle(const ScalarField& v_c);

} // namespace ovalab
