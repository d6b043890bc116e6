#pragma once

#include "ovalab/grid.hpp"
#include "ovalab/history.hpp"

#include <array>

namespace ovalab {

// Cutoff chi(v): 0 for v <= 5 theta/8, 1 for v >= 7 theta/8, quintic between.
double chi_cutoff(double v, double theta);
ScalarField truncate(const ScalarField& v, double theta);

// The six unstable and neutral eigenfunctions of the Ornstein-Uhlenbeck
// operator, in the order 1, y cos, y sin, y^2 - 4, y^2 cos 2phi, y^2 sin 2phi.
struct EigenBasis {
    std::array<ScalarField, 6> psi;
    std::array<double, 6> norm2{};
    std::array<double, 6> eigenvalue{1.0, 0.5, 0.5, 0.0, 0.0, 0.0};
    // psi_1 = y1^2 - 2, psi_2 = y2^2 - 2, psi_3 = 2 y1 y2
    std::array<ScalarField, 3> quad;
    std::array<double, 3> quad_norm2{};
};

EigenBasis eigen_basis(const GridPtr& grid);

// Discrete L = d_yy + y^{-1} d_y + y^{-2} d_phiphi - (y/2) d_y + 1.
ScalarField apply_ou(const ScalarField& f);

using Mat2 = std::array<std::array<double, 2>, 2>;

struct SpectralReport {
    double tau = 0.0;
    std::array<double, 6> coeff{};
    std::array<double, 3> alpha{};
    double S = 0.0, D = 0.0;
    std::array<double, 2> xi{};
    Mat2 Q{};
    std::array<double, 2> Q_eig{};
    double stable_residual = 0.0; // H-norm of the part orthogonal to the six modes
};

SpectralReport project(const ScalarField& v, double theta, double tau);
SpectralReport project(const ScalarField& v, double theta, double tau, const EigenBasis& basis);

Mat2 bubble_sheet_Q(const std::array<double, 3>& alpha, double tau);
std::array<double, 2> symmetric_eigenvalues(const Mat2& m);

struct KappaOptions {
    double theta = 0.2;
    double centering_tol = 1e-6;
    double fd_step = 0.1;   // lattice spacing for the C^4 norm
    double tau_step = 0.05; // sampling of [2 tau0, tau0]
};

struct KappaVerdict {
    double measured_kappa = 0.0; // |tau0| * || v_C - sqrt2 + (y^2-4)/(sqrt8 |tau0|) ||
    bool quadratic_ok = false;
    double centering_norm = 0.0; // || p_+ (v_C - sqrt2) ||
    bool centering_ok = false;
    double graphical_max = 0.0; // sup_tau |tau|^{1/50} ||v - sqrt2||_{C^4}
    bool graphical_ok = false;
    bool pass() const { return quadratic_ok && centering_ok && graphical_ok; }
};

KappaVerdict kappa_quadratic(const ProfileHistory& history, const GridPtr& grid, double tau0, double kappa,
                             const KappaOptions& opt = {});

// C^4 norm of v - sqrt2 on the disc of the given radius at time tau.
double c4_norm(const ProfileHistory& history, double tau, double radius, double h);

double width_ratio(const ScalarField& v_c);
Mat2 width_matrix(const ScalarField& v_c);

} // namespace ovalab
