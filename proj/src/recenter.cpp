#include "ovalab/recenter.hpp"

#include "ovalab/errors.hpp"
#include "ovalab/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace ovalab {

namespace {
const double sqrt2 = std::sqrt(2.0);
const double sqrt8 = std::sqrt(8.0);

std::array<double, 2> rotate(std::array<double, 2> x, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    return {c * x[0] - s * x[1], s * x[0] + c * x[1]};
}
} // namespace

double TransformParams::b(double tau) const {
    const double g = 1.0 + beta * std::exp(tau);
    require(g > 0.0, ErrorKind::domain, "1 + beta e^tau must be positive");
    return std::sqrt(g) - 1.0;
}

double TransformParams::Gamma(double tau) const {
    require(tau != 0.0, ErrorKind::domain, "Gamma is undefined at tau = 0");
    return (source_tau(tau) - tau) / tau;
}

std::array<double, 2> TransformParams::a(double tau) const {
    const double s = std::exp(0.5 * tau);
    return {s * alpha[0], s * alpha[1]};
}

double TransformParams::source_tau(double tau) const {
    const double g = 1.0 + beta * std::exp(tau);
    require(g > 0.0, ErrorKind::domain, "1 + beta e^tau must be positive");
    return tau + gamma - std::log1p(beta * std::exp(tau));
}

double TransformParams::target_tau(double s) const {
    const double d = std::exp(gamma) - beta * std::exp(s);
    require(d > 0.0, ErrorKind::domain, "source time is not reached by the transformed flow");
    return s - std::log(d);
}

TransformParams TransformParams::from_derived(double b, double Gamma, double tau, std::array<double, 2> a,
                                              double phi) {
    require(1.0 + b > 0.0, ErrorKind::domain, "1 + b must be positive");
    TransformParams p;
    p.beta = std::exp(-tau) * ((1.0 + b) * (1.0 + b) - 1.0);
    p.gamma = Gamma * tau + 2.0 * std::log1p(b);
    const double s = std::exp(-0.5 * tau);
    p.alpha = {s * a[0], s * a[1]};
    p.phi = phi;
    return p;
}

TransformParams TransformParams::inverse() const {
    TransformParams p;
    p.phi = -phi;
    p.gamma = -gamma;
    p.beta = -std::exp(-gamma) * beta;
    const auto r = rotate(alpha, phi);
    const double s = std::exp(-0.5 * gamma);
    p.alpha = {-s * r[0], -s * r[1]};
    return p;
}

TransformParams TransformParams::then(const TransformParams& next) const {
    TransformParams p;
    p.phi = phi + next.phi;
    p.gamma = gamma + next.gamma;
    p.beta = next.beta + std::exp(next.gamma) * beta;
    const double l2 = std::exp(0.5 * next.gamma);
    const auto r = rotate(next.alpha, -phi);
    p.alpha = {l2 * alpha[0] + r[0], l2 * alpha[1] + r[1]};
    return p;
}

TransformedHistory::TransformedHistory(HistoryPtr base, TransformParams p) : base_(std::move(base)), p_(p) {
    require(base_ != nullptr, ErrorKind::parameter, "missing base history");
    lo_ = p_.target_tau(base_->tau_min());
    // With beta > 0 the source time saturates at gamma - log(beta).
    const bool saturates = p_.beta > 0.0 && base_->tau_max() >= p_.gamma - std::log(p_.beta);
    hi_ = saturates ? std::numeric_limits<double>::infinity() : p_.target_tau(base_->tau_max());
}

double TransformedHistory::value(double y1, double y2, double tau) const {
    require(covers(tau), ErrorKind::coverage, "transformed history does not cover the requested time");
    const double b = p_.b(tau);
    const auto a = p_.a(tau);
    const auto r = rotate({y1, y2}, -p_.phi);
    const double s = 1.0 / (1.0 + b);
    return (1.0 + b) * base_->value((r[0] - a[0]) * s, (r[1] - a[1]) * s, p_.source_tau(tau));
}

TransformedField transform_full(const ProfileHistory& h, std::array<double, 2> a, double b, double Gamma, double phi,
                                double tau0, const GridPtr& grid) {
    require(1.0 + b > 0.0, ErrorKind::domain, "1 + b must be positive");
    const double src = (1.0 + Gamma) * tau0;
    require(h.covers(src, 1e-9), ErrorKind::coverage, "history does not cover (1 + Gamma) tau0");
    TransformedField out;
    const double ymax = grid->y_max();
    out.v = sample(grid, [&](double y, double p) {
        const auto r = rotate({y * std::cos(p), y * std::sin(p)}, -phi);
        const double x1 = (r[0] - a[0]) / (1.0 + b), x2 = (r[1] - a[1]) / (1.0 + b);
        if (std::hypot(x1, x2) > ymax) out.clamped = true;
        return (1.0 + b) * h.value(x1, x2, std::clamp(src, h.tau_min(), h.tau_max()));
    });
    return out;
}

ScalarField transform_profile(const ProfileHistory& h, double b, double Gamma, double tau0, const GridPtr& grid) {
    return transform_full(h, {0.0, 0.0}, b, Gamma, 0.0, tau0, grid).v;
}

namespace {

// Pairing fields, built once per solve.
struct Pairings {
    ScalarField one, ycos, ysin, quad;
    explicit Pairings(const GridPtr& g)
        : one(sample(g, [](double, double) { return 1.0; })),
          ycos(sample(g, [](double y, double p) { return y * std::cos(p); })),
          ysin(sample(g, [](double y, double p) { return y * std::sin(p); })),
          quad(sample(g, [](double y, double) { return y * y - 4.0; })) {}
};

std::array<double, 4> psi_impl(const ProfileHistory& h, double tau0, std::array<double, 2> a, double b, double Gamma,
                               const GridPtr& grid, const Pairings& P, const PsiOptions& opt) {
    const ScalarField vc = truncate(transform_full(h, a, b, Gamma, 0.0, tau0, grid).v, opt.theta);
    const double T = std::abs(tau0);
    ScalarField d1(grid), d4(grid);
    for (size_t n = 0; n < vc.values().size(); ++n) {
        d1.values()[n] = vc.values()[n] - sqrt2;
        d4.values()[n] = vc.values()[n] + P.quad.values()[n] / (sqrt8 * T);
    }
    return {inner_product_H(d1, P.one), inner_product_H(vc, P.ycos), inner_product_H(vc, P.ysin),
            inner_product_H(d4, P.quad)};
}

double inf_norm(const Eigen::VectorXd& x) { return x.cwiseAbs().maxCoeff(); }

} // namespace

std::array<double, 2> psi2(const ProfileHistory& h, double tau0, double b, double Gamma, const GridPtr& grid,
                           const PsiOptions& opt) {
    const auto r = psi_impl(h, tau0, {0.0, 0.0}, b, Gamma, grid, Pairings(grid), opt);
    return {r[0], r[3]};
}

std::array<double, 4> psi4(const ProfileHistory& h, double tau0, std::array<double, 2> a, double b, double Gamma,
                           const GridPtr& grid, const PsiOptions& opt) {
    return psi_impl(h, tau0, a, b, Gamma, grid, Pairings(grid), opt);
}

double jacobian_det(const ProfileHistory& h, double tau0, double b, double Gamma, const GridPtr& grid,
                    const PsiOptions& opt, double step) {
    const Pairings P(grid);
    auto f = [&](double bb, double gg) {
        const auto r = psi_impl(h, tau0, {0.0, 0.0}, bb, gg, grid, P, opt);
        return std::array<double, 2>{r[0], r[3]};
    };
    const auto bp = f(b + step, Gamma), bm = f(b - step, Gamma);
    const auto gp = f(b, Gamma + step), gm = f(b, Gamma - step);
    const double j00 = (bp[0] - bm[0]) / (2 * step), j10 = (bp[1] - bm[1]) / (2 * step);
    const double j01 = (gp[0] - gm[0]) / (2 * step), j11 = (gp[1] - gm[1]) / (2 * step);
    return j00 * j11 - j01 * j10;
}

double rotation_angle(const ScalarField& vc) {
    const auto& g = vc.grid_ptr();
    const double C = inner_product_H(vc, sample(g, [](double y, double p) { return y * y * std::cos(2 * p); }));
    const double S = inner_product_H(vc, sample(g, [](double y, double p) { return y * y * std::sin(2 * p); }));
    // Rotating by phi turns (C, S) into (C cos 2phi - S sin 2phi, S cos 2phi + C sin 2phi).
    double phi = 0.5 * std::atan2(-S, C);
    if (phi < 0.0) phi += std::numbers::pi;
    return phi;
}

namespace {

struct Newton {
    const ProfileHistory& h;
    double tau0;
    const GridPtr& grid;
    const SolveOptions& opt;
    Pairings P;
    int dim;

    // Unknowns: (b, Gamma) or (a1, a2, b, Gamma).
    Eigen::VectorXd F(const Eigen::VectorXd& x) const {
        const std::array<double, 2> a = dim == 4 ? std::array<double, 2>{x[0], x[1]} : std::array<double, 2>{0, 0};
        const double b = x[dim - 2], G = x[dim - 1];
        const auto r = psi_impl(h, tau0, a, b, G, grid, P, opt.psi);
        Eigen::VectorXd out(dim);
        if (dim == 2)
            out << r[0], r[3];
        else
            out << r[0], r[1], r[2], r[3];
        return out;
    }

    Eigen::MatrixXd J(const Eigen::VectorXd& x) const {
        Eigen::MatrixXd m(dim, dim);
        for (int k = 0; k < dim; ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp[k] += opt.fd_step;
            xm[k] -= opt.fd_step;
            m.col(k) = (F(xp) - F(xm)) / (2 * opt.fd_step);
        }
        return m;
    }

    bool in_box(const Eigen::VectorXd& x) const {
        const double b = x[dim - 2], G = x[dim - 1];
        return tau0 * tau0 * b * b + G * G <= 100.0 * opt.kappa * opt.kappa * (1.0 + 1e-12);
    }

    // F(x), or nothing when x leaves the history or the parameter domain.
    bool try_eval(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
        if (1.0 + x[dim - 2] <= 0.0) return false;
        try {
            out = F(x);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::coverage || e.kind() == ErrorKind::domain) return false;
            throw;
        }
        return out.allFinite();
    }

    bool run(Eigen::VectorXd& x, int& iters, double& res) const {
        Eigen::VectorXd f;
        if (!try_eval(x, f)) return false;
        for (iters = 0; iters < opt.max_iter; ++iters) {
            res = inf_norm(f);
            if (res < opt.tol) return true;
            Eigen::VectorXd dx;
            try {
                dx = J(x).fullPivLu().solve(-f);
            } catch (const Error&) {
                return false;
            }
            if (!dx.allFinite()) return false;
            // Damped step: halve until the residual decreases.
            double lam = 1.0;
            bool moved = false;
            for (int k = 0; k < 30; ++k, lam *= 0.5) {
                Eigen::VectorXd xn = x + lam * dx, fn;
                if (try_eval(xn, fn) && inf_norm(fn) < res) {
                    x = xn;
                    f = fn;
                    moved = true;
                    break;
                }
            }
            if (!moved) {
                res = inf_norm(f);
                return res < opt.tol;
            }
        }
        res = inf_norm(f);
        return res < opt.tol;
    }
};

SolveResult finish(const Newton& nw, const Eigen::VectorXd& x, int iters, double res, int start) {
    SolveResult out;
    out.tau0 = nw.tau0;
    out.iterations = iters;
    out.residual = res;
    out.start = start;
    if (nw.dim == 4) out.a = {x[0], x[1]};
    out.b = x[nw.dim - 2];
    out.Gamma = x[nw.dim - 1];
    out.jacobian_det = nw.J(x).determinant();
    require(out.jacobian_det > 0.0, ErrorKind::degeneracy, "Jacobian determinant is not positive at the zero");
    if (nw.dim == 4) {
        const auto v = transform_full(nw.h, out.a, out.b, out.Gamma, 0.0, nw.tau0, nw.grid).v;
        out.phi = rotation_angle(truncate(v, nw.opt.psi.theta));
    }
    out.params = TransformParams::from_derived(out.b, out.Gamma, nw.tau0, out.a, out.phi);
    return out;
}

} // namespace

SolveResult solve_psi_from(const ProfileHistory& h, double tau0, const GridPtr& grid, const std::vector<double>& start,
                           const SolveOptions& opt) {
    require(tau0 < 0.0, ErrorKind::parameter, "tau0 must be negative");
    const int dim = opt.mode == SolveMode::two_param ? 2 : 4;
    require(static_cast<int>(start.size()) == dim, ErrorKind::parameter, "start has the wrong dimension");
    require(h.covers(tau0), ErrorKind::coverage, "history does not reach tau0");
    Newton nw{h, tau0, grid, opt, Pairings(grid), dim};
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(start.data(), dim);
    int it = 0;
    double res = 0.0;
    if (!nw.run(x, it, res)) fail(ErrorKind::search, "Newton iteration did not converge");
    return finish(nw, x, it, res, 0);
}

SolveResult solve_psi(const ProfileHistory& h, double tau0, const GridPtr& grid, const SolveOptions& opt) {
    require(tau0 < 0.0, ErrorKind::parameter, "tau0 must be negative");
    require(opt.kappa > 0.0, ErrorKind::parameter, "kappa must be positive");
    require(h.covers(tau0), ErrorKind::coverage, "history does not reach tau0");
    const int dim = opt.mode == SolveMode::two_param ? 2 : 4;
    Newton nw{h, tau0, grid, opt, Pairings(grid), dim};
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double R = 10.0 * opt.kappa;
    for (int s = 0; s <= opt.starts; ++s) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        if (s > 0) {
            // Uniform point of the ellipse |tau0|^2 b^2 + Gamma^2 <= R^2.
            double u, w;
            do {
                u = U(rng);
                w = U(rng);
            } while (u * u + w * w > 1.0);
            x[dim - 2] = R * u / std::abs(tau0);
            x[dim - 1] = R * w;
        }
        int it = 0;
        double res = 0.0;
        if (nw.run(x, it, res) && nw.in_box(x)) return finish(nw, x, it, res, s);
    }
    fail(ErrorKind::search, "no zero of the recentering map found in the search box");
}

} // namespace ovalab
