#include "ovalab/spectral.hpp"

#include "ovalab/errors.hpp"
#include "numerics.hpp"
#include "stencils.hpp"

#include <algorithm>
#include <cmath>

namespace ovalab {

namespace {
const double sqrt2 = std::sqrt(2.0);
const double sqrt8 = std::sqrt(8.0);
} // namespace

double chi_cutoff(double v, double theta) {
    const double lo = 0.625 * theta, hi = 0.875 * theta;
    return smoothstep5((v - lo) / (hi - lo));
}

ScalarField truncate(const ScalarField& v, double theta) {
    require(theta > 0.0, ErrorKind::parameter, "theta must be positive");
    ScalarField out(v.grid_ptr());
    for (size_t n = 0; n < v.values().size(); ++n) out.values()[n] = v.values()[n] * chi_cutoff(v.values()[n], theta);
    return out;
}

EigenBasis eigen_basis(const GridPtr& g) {
    EigenBasis b;
    b.psi[0] = ScalarField(g, 1.0);
    b.psi[1] = sample(g, [](double y, double p) { return y * std::cos(p); });
    b.psi[2] = sample(g, [](double y, double p) { return y * std::sin(p); });
    b.psi[3] = sample(g, [](double y, double) { return y * y - 4.0; });
    b.psi[4] = sample(g, [](double y, double p) { return y * y * std::cos(2 * p); });
    b.psi[5] = sample(g, [](double y, double p) { return y * y * std::sin(2 * p); });
    b.quad[0] = sample(g, [](double y, double p) { return y * y * std::cos(p) * std::cos(p) - 2.0; });
    b.quad[1] = sample(g, [](double y, double p) { return y * y * std::sin(p) * std::sin(p) - 2.0; });
    b.quad[2] = sample(g, [](double y, double p) { return 2.0 * y * y * std::cos(p) * std::sin(p); });
    for (int k = 0; k < 6; ++k) b.norm2[k] = inner_product_H(b.psi[k], b.psi[k]);
    for (int k = 0; k < 3; ++k) b.quad_norm2[k] = inner_product_H(b.quad[k], b.quad[k]);
    return b;
}

ScalarField apply_ou(const ScalarField& f) {
    const auto& G = f.grid();
    const int n = G.n_phi();
    const auto& F = fourier_diff(n);
    ScalarField out(f.grid_ptr());
    const double* data = f.values().data();
    const auto pole = pole_derivs(G, data);
    for (int j = 0; j < n; ++j) out(0, j) = pole.h11 + pole.h22 + pole.f;
    // Angular second derivative by spectral differentiation.
    std::vector<double> fpp(static_cast<size_t>(G.size()), 0.0);
    for (int i = 1; i <= G.n_r(); ++i)
        for (int a = 0; a < n; ++a) {
            double s2 = 0.0;
            for (int b = 0; b < n; ++b) s2 += F.d2[a * n + b] * f(i, b);
            fpp[G.index(i, a)] = s2;
        }
    for (int i = 1; i <= G.n_r(); ++i) {
        const auto& s = G.stencil4(i);
        const double y = G.y(i);
        for (int j = 0; j < n; ++j) {
            double fy = 0.0, fyy = 0.0;
            for (int k = 0; k < s.count; ++k) {
                const double val = data[G.mirrored(s.first + k, j)];
                fy += s.d1[k] * val;
                fyy += s.d2[k] * val;
            }
            out(i, j) = fyy + fy / y + fpp[G.index(i, j)] / (y * y) - 0.5 * y * fy + f(i, j);
        }
    }
    return out;
}

Mat2 bubble_sheet_Q(const std::array<double, 3>& a, double tau) {
    const double s = std::abs(tau);
    return Mat2{{{s * a[0], s * a[2]}, {s * a[2], s * a[1]}}};
}

std::array<double, 2> symmetric_eigenvalues(const Mat2& m) {
    const double tr = m[0][0] + m[1][1];
    const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    return {0.5 * tr - disc, 0.5 * tr + disc};
}

SpectralReport project(const ScalarField& v, double theta, double tau) {
    return project(v, theta, tau, eigen_basis(v.grid_ptr()));
}

SpectralReport project(const ScalarField& v, double theta, double tau, const EigenBasis& basis) {
    require(basis.psi[0].grid().same_as(v.grid()), ErrorKind::shape, "basis built on a different grid");
    SpectralReport r;
    r.tau = tau;
    ScalarField u(v.grid_ptr());
    for (size_t n = 0; n < v.values().size(); ++n) {
        const double x = v.values()[n];
        u.values()[n] = (x - sqrt2) * chi_cutoff(x, theta);
    }
    double captured = 0.0;
    for (int k = 0; k < 6; ++k) {
        const double ip = inner_product_H(u, basis.psi[k]);
        r.coeff[k] = ip / basis.norm2[k];
        captured += ip * ip / basis.norm2[k];
    }
    r.stable_residual = std::sqrt(std::max(0.0, inner_product_H(u, u) - captured));
    for (int k = 0; k < 3; ++k) r.alpha[k] = inner_product_H(u, basis.quad[k]) / basis.quad_norm2[k];
    r.S = r.alpha[0] + r.alpha[1];
    r.D = r.alpha[0] * r.alpha[1] - r.alpha[2] * r.alpha[2];
    r.xi = {sqrt2 * tau * r.S - 1.0, 8.0 * tau * tau * r.D - 1.0};
    r.Q = bubble_sheet_Q(r.alpha, tau);
    r.Q_eig = symmetric_eigenvalues(r.Q);
    return r;
}

double c4_norm(const ProfileHistory& h, double tau, double radius, double step) {
    const int m = static_cast<int>(std::ceil(radius / step));
    const int n = 2 * (m + 2) + 1;
    std::vector<double> f(static_cast<size_t>(n) * n);
    auto at = [&](int a, int b) -> double& { return f[static_cast<size_t>(a) * n + b]; };
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) at(a, b) = h.value((a - m - 2) * step, (b - m - 2) * step, tau) - sqrt2;
    // Central five-point stencils for derivative orders 0..4.
    static const double W[5][5] = {
        {0, 0, 1, 0, 0},
        {1.0 / 12, -8.0 / 12, 0, 8.0 / 12, -1.0 / 12},
        {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12},
        {-0.5, 1.0, 0, -1.0, 0.5},
        {1, -4, 6, -4, 1},
    };
    double best = 0.0;
    for (int a = 2; a < n - 2; ++a)
        for (int b = 2; b < n - 2; ++b) {
            const double x1 = (a - m - 2) * step, x2 = (b - m - 2) * step;
            if (x1 * x1 + x2 * x2 > radius * radius) continue;
            for (int p = 0; p <= 4; ++p)
                for (int q = 0; p + q <= 4; ++q) {
                    double acc = 0.0;
                    for (int s = 0; s < 5; ++s) {
                        if (W[p][s] == 0.0) continue;
                        for (int t = 0; t < 5; ++t)
                            if (W[q][t] != 0.0) acc += W[p][s] * W[q][t] * at(a + s - 2, b + t - 2);
                    }
                    acc /= std::pow(step, p + q);
                    best = std::max(best, std::abs(acc));
                }
        }
    return best;
}

KappaVerdict kappa_quadratic(const ProfileHistory& history, const GridPtr& grid, double tau0, double kappa,
                             const KappaOptions& opt) {
    require(tau0 < 0.0, ErrorKind::parameter, "tau0 must be negative");
    require(history.covers(tau0, 1e-9) && history.covers(2 * tau0, 1e-9), ErrorKind::coverage,
            "history must cover [2 tau0, tau0]");
    KappaVerdict out;
    const double T = std::abs(tau0);
    const ScalarField v = history.field(grid, tau0);
    const EigenBasis basis = eigen_basis(grid);
    ScalarField d(grid), c(grid);
    for (size_t n = 0; n < v.values().size(); ++n) {
        const double x = v.values()[n];
        const double vc = x * chi_cutoff(x, opt.theta);
        d.values()[n] = vc - sqrt2 + basis.psi[3].values()[n] / (sqrt8 * T);
        c.values()[n] = vc - sqrt2;
    }
    out.measured_kappa = T * norm_H(d);
    out.quadratic_ok = out.measured_kappa <= kappa;
    double cen = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double ip = inner_product_H(c, basis.psi[k]);
        cen += ip * ip / basis.norm2[k];
    }
    out.centering_norm = std::sqrt(cen);
    out.centering_ok = out.centering_norm <= opt.centering_tol;

    const int steps = std::max(1, static_cast<int>(std::ceil(T / opt.tau_step)));
    double worst = 0.0;
    for (int s = 0; s <= steps; ++s) {
        const double tau = 2 * tau0 + (T * s) / steps;
        const double a = std::abs(tau);
        const double radius = 2.0 * std::pow(a, 0.01);
        worst = std::max(worst, std::pow(a, 0.02) * c4_norm(history, tau, radius, opt.fd_step));
    }
    out.graphical_max = worst;
    out.graphical_ok = worst <= 1.0;
    return out;
}

double width_ratio(const ScalarField& v_c) {
    const auto& g = v_c.grid_ptr();
    auto num = sample(g, [](double y, double p) { return y * y * std::cos(p) * std::cos(p) - 2.0; });
    auto den = sample(g, [](double y, double p) { return y * y * std::sin(p) * std::sin(p) - 2.0; });
    const double a = inner_product_H(v_c, num), b = inner_product_H(v_c, den);
    require(std::abs(b) > 1e-8, ErrorKind::degeneracy, "width ratio denominator vanishes");
    return a / b;
}

Mat2 width_matrix(const ScalarField& v_c) {
    const auto& g = v_c.grid_ptr();
    auto p11 = sample(g, [](double y, double p) { return y * y * std::cos(p) * std::cos(p) - 2.0; });
    auto p22 = sample(g, [](double y, double p) { return y * y * std::sin(p) * std::sin(p) - 2.0; });
    auto p12 = sample(g, [](double y, double p) { return y * y * std::cos(p) * std::sin(p); });
    const double a = inner_product_H(v_c, p11), b = inner_product_H(v_c, p22), c = inner_product_H(v_c, p12);
    return Mat2{{{a, c}, {c, b}}};
}

} // namespace ovalab
