#include "ovalab/diagnostics.hpp"

#include "ovalab/errors.hpp"
#include "ovalab/history.hpp"
#include "numerics.hpp"
#include "stencils.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ovalab {

namespace {

const double sqrt2 = std::sqrt(2.0);
const double sqrt8 = std::sqrt(8.0);
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

CartDerivs cart_at(const PolarGrid& G, const double* q, int i, int j) {
    if (i == 0) return pole_derivs(G, q);
    return to_cartesian(polar_derivs(G, q, i, j), G.y(i), G.phi(j));
}

ScalarField continued(const ScalarField& q) {
    ScalarField c = q;
    fill_exterior(c);
    return c;
}

// Value of a nodal field along ray j at radius y by 4-point Lagrange
// interpolation, reflecting through the pole.
double along_ray(const PolarGrid& G, const std::vector<double>& f, int j, double y) {
    const int i = G.locate(y);
    int first = std::min(i - 1, G.n_r() - 3);
    double xs[4], fs[4];
    for (int m = 0; m < 4; ++m) {
        const int si = first + m;
        xs[m] = G.signed_y(si);
        fs[m] = f[G.mirrored(si, j)];
    }
    return lagrange4(y, xs, fs);
}

template <class Gamma>
ConcavityReport concavity_impl(const ScalarField& q_in, double delta, Gamma gamma) {
    const ScalarField q = continued(q_in);
    const auto& G = q.grid();
    ConcavityReport rep;
    rep.delta = delta;
    rep.margin = ScalarField(q.grid_ptr(), nan);
    rep.max_margin = -std::numeric_limits<double>::infinity();
    const double* data = q.values().data();
    for (int i = 0; i <= G.n_r(); ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            const double Q = q(i, j);
            if (Q <= v_floor * v_floor) continue;
            if (i == 0 && j > 0) {
                rep.margin(i, j) = rep.margin(0, 0);
                continue;
            }
            const CartDerivs c = cart_at(G, data, i, j);
            const double V = std::sqrt(Q);
            const double V1 = c.g1 / (2 * V), V2 = c.g2 / (2 * V);
            const double V11 = (c.h11 - 2 * V1 * V1) / (2 * V);
            const double V12 = (c.h12 - 2 * V1 * V2) / (2 * V);
            const double V22 = (c.h22 - 2 * V2 * V2) / (2 * V);
            const double s = (V1 * c.g1 + V2 * c.g2) / (1 + V1 * V1 + V2 * V2);
            const double M11 = c.h11 - s * V11, M12 = c.h12 - s * V12, M22 = c.h22 - s * V22;
            const double g11 = 1 + V1 * V1, g12 = V1 * V2, g22 = 1 + V2 * V2;
            const double detg = g11 * g22 - g12 * g12;
            const double B = M11 * g22 + M22 * g11 - 2 * M12 * g12;
            const double detM = M11 * M22 - M12 * M12;
            const double lam = (B + std::sqrt(std::max(B * B - 4 * detg * detM, 0.0))) / (2 * detg);
            const double m = lam - gamma(V) - delta;
            rep.margin(i, j) = m;
            if (m > rep.max_margin) {
                rep.max_margin = m;
                rep.worst_i = i;
                rep.worst_j = j;
                rep.worst_y = G.y(i);
                rep.worst_phi = G.phi(j);
            }
        }
    require(rep.worst_i >= 0, ErrorKind::domain, "slice has no interior nodes");
    return rep;
}

CollarReport collar_scan(const ScalarField& q_in, const std::function<bool(double y, double v)>& inside) {
    const ScalarField q = continued(q_in);
    const auto& G = q.grid();
    CollarReport rep;
    for (int i = 1; i <= G.n_r(); ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            if (q(i, j) <= 0.0) continue;
            const double y = G.y(i);
            if (!inside(y, std::sqrt(q(i, j)))) continue;
            const PolarDerivs d = polar_derivs(G, q.values().data(), i, j);
            const double dev = std::abs(y * d.fy + 4.0);
            ++rep.nodes;
            if (dev >= rep.deviation) {
                rep.deviation = dev;
                rep.y = y;
                rep.phi = G.phi(j);
            }
        }
    require(rep.nodes > 0, ErrorKind::coverage, "collar region contains no grid nodes");
    return rep;
}

} // namespace

AsymptoticsReport asymptotics_report(const ScalarField& q_in, const TipField& tip, double tau, double eps,
                                     const BowlProfile& bowl) {
    require(tau < 0.0, ErrorKind::parameter, "asymptotics need tau < 0");
    require(eps > 0.0 && eps < sqrt2, ErrorKind::parameter, "eps must lie in (0, sqrt2)");
    const ScalarField q = continued(q_in);
    const auto& G = q.grid();
    const double T = std::abs(tau), sT = std::sqrt(T);
    require(1.0 / eps <= G.y_max(), ErrorKind::coverage, "parabolic region exceeds the grid");
    require(sT * (sqrt2 - eps) <= G.y_max(), ErrorKind::coverage, "intermediate region exceeds the grid");
    AsymptoticsReport rep;

    for (int i = 0; i <= G.n_r() && G.y(i) <= 1.0 / eps; ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            const double y = G.y(i);
            const double v = std::sqrt(std::max(q(i, j), 0.0));
            rep.parabolic = std::max(rep.parabolic, std::abs(v - sqrt2 + (y * y - 4) / (sqrt8 * T)));
        }
    rep.parabolic *= T;

    const int nz = 64;
    for (int k = 0; k <= nz; ++k) {
        const double z = (sqrt2 - eps) * k / nz;
        for (int j = 0; j < G.n_phi(); ++j) {
            const double y = sT * z, p = G.phi(j);
            const double v = std::sqrt(std::max(interpolate(q, y * std::cos(p), y * std::sin(p)), 0.0));
            rep.intermediate = std::max(rep.intermediate, std::abs(v - std::sqrt(2 - z * z)));
        }
    }

    if (tip.empty()) {
        rep.tip = nan;
    } else {
        require(1.0 / eps <= bowl.rho_max(), ErrorKind::coverage, "bowl table too short for the tip region");
        for (int j = 0; j < tip.n_phi; ++j) {
            const ZoomedTip z = zoomed_tip(tip, tau, j, 1.0 / eps);
            for (size_t k = 0; k < z.rho.size(); ++k)
                rep.tip = std::max(rep.tip, std::abs(z.Z[k] - bowl.value(z.rho[k])));
        }
    }
    return rep;
}

AsymptoticsReport asymptotics_report(const FlowState& s, double eps, const BowlProfile& bowl) {
    require(s.mode == FlowMode::renormalized, ErrorKind::parameter, "asymptotics need a renormalized state");
    return asymptotics_report(s.q, s.tip, s.tau, eps, bowl);
}

ConcavityReport concavity_margin(const ScalarField& V, double t, double delta) {
    require(t <= -std::numbers::e, ErrorKind::domain, "gamma needs t <= -e");
    require(delta >= 0.0, ErrorKind::parameter, "delta must be nonnegative");
    const double c = std::pow(-t / std::log(-t), 1.5);
    return concavity_impl(signed_square(V), delta, [c](double v) { return c / (v * v * v); });
}

ConcavityReport concavity_margin_renormalized(const ScalarField& q, double tau, double delta) {
    require(tau <= -1.0, ErrorKind::domain, "gamma needs tau <= -1");
    require(delta >= 0.0, ErrorKind::parameter, "delta must be nonnegative");
    const double c = std::pow(-tau, -1.5);
    return concavity_impl(q, delta, [c](double v) { return c / (v * v * v); });
}

CollarReport collar_deviation(const ScalarField& q, double tau, double theta, double L) {
    require(tau < 0.0 && theta > 0.0 && L > 0.0, ErrorKind::parameter, "collar needs tau < 0, theta > 0, L > 0");
    const double lo = L / std::sqrt(-tau), hi = 2 * theta;
    require(lo < hi, ErrorKind::coverage, "collar is empty: L/sqrt|tau| >= 2 theta");
    CollarReport rep = collar_scan(q, [&](double, double v) { return v >= lo && v <= hi; });
    rep.v_lo = lo;
    rep.v_hi = hi;
    return rep;
}

CollarReport collar_deviation_band(const ScalarField& q, double y_lo, double y_hi) {
    require(y_lo < y_hi, ErrorKind::parameter, "empty band");
    return collar_scan(q, [&](double y, double) { return y >= y_lo && y <= y_hi; });
}

double cylindrical_estimate(const ScalarField& q_in, double tau, double L) {
    require(tau < 0.0 && L > 0.0, ErrorKind::parameter, "cylindrical estimate needs tau < 0 and L > 0");
    const ScalarField q = continued(q_in);
    const auto& G = q.grid();
    const double vmin = L / std::sqrt(-tau);
    double worst = 0.0;
    int nodes = 0;
    for (int i = 1; i <= G.n_r(); ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            if (q(i, j) < vmin * vmin) continue;
            ++nodes;
            const PolarDerivs d = polar_derivs(G, q.values().data(), i, j);
            const double y = G.y(i), v = std::sqrt(q(i, j));
            const double vy = d.fy / (2 * v), vp = d.fp / (2 * v);
            const double vyy = (d.fyy - 2 * vy * vy) / (2 * v);
            const double vyp = (d.fyp - 2 * vy * vp) / (2 * v);
            const double vpp = (d.fpp - 2 * vp * vp) / (2 * v);
            for (double x : {std::abs(vy), std::abs(vp / y), std::abs(v * vyy), std::abs(v * vyp / y),
                             std::abs(v * vpp / (y * y))})
                worst = std::max(worst, x);
        }
    require(nodes > 0, ErrorKind::coverage, "cylindrical region contains no grid nodes");
    return worst;
}

double huisken_renormalized(const ScalarField& q_in) {
    const ScalarField q = continued(q_in);
    const auto& G = q.grid();
    const double* data = q.values().data();
    // Area element 2 pi v sqrt(1 + |Dv|^2) = 2 pi sqrt(q + |Dq|^2 / 4), smooth across the rim.
    std::vector<double> h(q.values().size());
    for (int i = 0; i <= G.n_r(); ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            const CartDerivs c = cart_at(G, data, i, j);
            const double P = c.g1 * c.g1 + c.g2 * c.g2;
            h[G.index(i, j)] = std::exp(-q(i, j) / 4) * std::sqrt(std::max(q(i, j) + P / 4, 0.0));
        }
    const auto& gl = gauss_legendre_8();
    double total = 0.0;
    for (int j = 0; j < G.n_phi(); ++j) {
        if (q(0, j) <= 0.0) continue;
        const double R = invert_ray(q, j, 0.0);
        double ray = 0.0;
        for (int i = 0; i < G.n_r() && G.y(i) < R; ++i) {
            const double a = G.y(i), b = std::min(G.y(i + 1), R);
            const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
            for (const auto& [x, w] : gl) {
                const double y = mid + half * x;
                ray += half * w * along_ray(G, h, j, y) * std::exp(-y * y / 4) * y;
            }
        }
        if (R >= G.y_max()) ray += h[G.index(G.n_r(), j)] * 2 * std::exp(-G.y_max() * G.y_max() / 4);
        total += ray;
    }
    return total * G.dphi() * 2 * std::numbers::pi * std::pow(4 * std::numbers::pi, -1.5);
}

double huisken_density(const ScalarField& V, double r) {
    require(r > 0.0, ErrorKind::parameter, "scale must be positive");
    const auto& G = V.grid();
    std::vector<double> y(G.y_nodes());
    for (double& x : y) x /= r;
    auto grid = std::make_shared<const PolarGrid>(std::move(y), G.n_phi());
    ScalarField q = signed_square(V);
    ScalarField qs(grid, q.values());
    for (double& x : qs.values()) x /= r * r;
    return huisken_renormalized(qs);
}

double tip_cutoff(double v, double theta) { return smoothstep5((v - theta / 8) / (theta / 8)); }

WeightField tip_weight(const TipField& Y, double tau, double theta, const BowlProfile& bowl) {
    require(!Y.empty(), ErrorKind::parameter, "tip patch not populated");
    require(tau < 0.0 && theta > 0.0 && theta < Y.v_top, ErrorKind::parameter, "need tau < 0 and 0 < theta < v_top");
    const double kt = theta / Y.dv();
    const int k_theta = static_cast<int>(std::lround(kt));
    require(std::abs(kt - k_theta) < 1e-9, ErrorKind::parameter, "theta must be a tip node");
    require(std::sqrt(-tau) * Y.v_top <= bowl.rho_max(), ErrorKind::coverage, "bowl table too short for the tip");
    WeightField w;
    w.n_v = Y.n_v;
    w.n_phi = Y.n_phi;
    w.v_top = Y.v_top;
    w.theta = theta;
    w.tau = tau;
    w.mu.assign(static_cast<size_t>(Y.n_v + 1) * Y.n_phi, 0.0);
    const double h = Y.dv();
    for (int j = 0; j < Y.n_phi; ++j) {
        // d/dv (Y^2/4) at the nodes; even reflection at v = 0.
        std::vector<double> dy2(Y.n_v + 1);
        auto y2 = [&](int k) { return 0.25 * Y.at(std::abs(k), j) * Y.at(std::abs(k), j); };
        for (int k = 0; k < Y.n_v; ++k) dy2[k] = (y2(k + 1) - y2(k - 1)) / (2 * h);
        dy2[Y.n_v] = (3 * y2(Y.n_v) - 4 * y2(Y.n_v - 1) + y2(Y.n_v - 2)) / (2 * h);
        // The integrand minus its 1/v singularity, which is integrated exactly.
        std::vector<double> g(Y.n_v + 1);
        for (int k = 0; k <= Y.n_v; ++k) {
            const double v = Y.v(k), z = tip_cutoff(v, theta);
            const double yb = bowl.rescaled_deriv(v, tau);
            const double smooth = k == 0 ? 0.0 : z / v - (1 - z) * yb * yb / v;
            g[k] = z * dy2[k] + smooth;
        }
        // k = 0: yb ~ -(sqrt2/4) |tau|^{1/2} v, so yb^2 / v -> 0 and z / v = 0 near 0.
        std::vector<double> cum(Y.n_v + 1, 0.0); // \int_0^{v_k} g
        for (int k = 1; k <= Y.n_v; ++k) cum[k] = cum[k - 1] + 0.5 * h * (g[k - 1] + g[k]);
        const double base = -0.25 * Y.at(k_theta, j) * Y.at(k_theta, j);
        w.mu[static_cast<size_t>(j)] = -std::numeric_limits<double>::infinity();
        for (int k = 1; k <= Y.n_v; ++k)
            w.mu[static_cast<size_t>(k) * Y.n_phi + j] = base + (cum[k_theta] - cum[k]) - std::log(theta / Y.v(k));
    }
    return w;
}

double poincare_check(const std::function<double(double)>& F, const WeightField& mu, const TipField& Y, double tau) {
    require(mu.n_v == Y.n_v && mu.n_phi == Y.n_phi, ErrorKind::shape, "weight and tip patch differ");
    require(tau < 0.0, ErrorKind::parameter, "need tau < 0");
    const double top = Y.v_top, h = Y.dv();
    const double eps = 1e-4 * top;
    auto dF = [&](double v) {
        return (F(v - 2 * eps) - 8 * F(v - eps) + 8 * F(v + eps) - F(v + 2 * eps)) / (12 * eps);
    };
    double scale = 0.0;
    for (int k = 0; k <= Y.n_v; ++k) scale = std::max(scale, std::abs(F(Y.v(k))));
    require(std::abs(F(top)) <= 1e-10 * (1 + scale), ErrorKind::parameter, "F must vanish at 2 theta");
    require(std::abs(dF(0.0)) <= 1e-6 * (1 + scale) / top, ErrorKind::parameter, "F must satisfy F'(0) = 0");
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (int j = 0; j < Y.n_phi; ++j) {
        double mmax = -std::numeric_limits<double>::infinity();
        for (int k = 1; k <= Y.n_v; ++k) mmax = std::max(mmax, mu.at(k, j));
        double lhs = 0.0, rhs = 0.0;
        for (int k = 0; k <= Y.n_v; ++k) {
            const double v = Y.v(k);
            const double w = (k == 0 || k == Y.n_v ? 0.5 : 1.0) * h * std::exp(mu.at(k, j) - mmax);
            double yv;
            if (k == 0)
                yv = 0.0;
            else if (k == Y.n_v)
                yv = (3 * Y.at(k, j) - 4 * Y.at(k - 1, j) + Y.at(k - 2, j)) / (2 * h);
            else
                yv = (Y.at(k + 1, j) - Y.at(k - 1, j)) / (2 * h);
            const double f = F(v), df = dF(v);
            lhs += w * f * f;
            rhs += w * df * df / (1 + yv * yv);
        }
        require(rhs > 0.0, ErrorKind::degeneracy, "F is constant on the support of the weight");
        worst = std::max(worst, -tau * lhs / rhs);
    }
    return worst;
}

} // namespace ovalab
