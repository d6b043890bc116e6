#include "stencils.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace ovalab {

PolarDerivs polar_derivs(const PolarGrid& G, const double* f, int i, int j) {
    const int n = G.n_phi();
    const double h = G.dphi();
    auto ang = [&](int ring, int jj, double& d1, double& d2) {
        const double* r = f + static_cast<size_t>(ring) * n;
        const double fm2 = r[G.wrap(jj - 2)], fm1 = r[G.wrap(jj - 1)], f0 = r[G.wrap(jj)];
        const double fp1 = r[G.wrap(jj + 1)], fp2 = r[G.wrap(jj + 2)];
        d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h);
        d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h);
    };
    PolarDerivs d{};
    d.f = f[G.index(i, j)];
    ang(i, j, d.fp, d.fpp);
    const auto& s = G.stencil4(i);
    for (int k = 0; k < s.count; ++k) {
        const int si = s.first + k;
        const int ring = std::abs(si);
        const int jj = si < 0 ? j + n / 2 : j;
        const double val = f[G.index(ring, jj)];
        d.fy += s.d1[k] * val;
        d.fyy += s.d2[k] * val;
        if (ring > 0) {
            double a1, a2;
            ang(ring, jj, a1, a2);
            d.fyp += s.d1[k] * a1;
        }
    }
    return d;
}

CartDerivs pole_derivs(const PolarGrid& G, const double* f) {
    const int n = G.n_phi();
    struct Harm {
        double m, a1, b1, a2, b2;
    };
    auto harm = [&](int ring) {
        Harm H{0, 0, 0, 0, 0};
        const double* r = f + static_cast<size_t>(ring) * n;
        for (int j = 0; j < n; ++j) {
            const double p = G.phi(j);
            H.m += r[j];
            H.a1 += r[j] * std::cos(p);
            H.b1 += r[j] * std::sin(p);
            H.a2 += r[j] * std::cos(2 * p);
            H.b2 += r[j] * std::sin(2 * p);
        }
        H.m /= n;
        H.a1 *= 2.0 / n;
        H.b1 *= 2.0 / n;
        H.a2 *= 2.0 / n;
        H.b2 *= 2.0 / n;
        return H;
    };
    const Harm h1 = harm(1), h2 = harm(2);
    const double r1 = G.y(1), r2 = G.y(2);
    // Leading coefficient A of X(r) = A r^p + B r^{p+2} from two radii.
    auto lead = [&](double x1, double x2, int p) {
        const double p1 = std::pow(r1, p), p2 = std::pow(r2, p);
        const double q1 = p1 * r1 * r1, q2 = p2 * r2 * r2;
        return (x1 * q2 - x2 * q1) / (p1 * q2 - p2 * q1);
    };
    CartDerivs c{};
    c.f = f[0];
    c.g1 = lead(h1.a1, h2.a1, 1);
    c.g2 = lead(h1.b1, h2.b1, 1);
    const double lap = 4.0 * lead(h1.m - c.f, h2.m - c.f, 2);
    const double diffH = 4.0 * lead(h1.a2, h2.a2, 2);
    c.h12 = 2.0 * lead(h1.b2, h2.b2, 2);
    c.h11 = 0.5 * (lap + diffH);
    c.h22 = 0.5 * (lap - diffH);
    return c;
}

CartDerivs to_cartesian(const PolarDerivs& d, double y, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const double fy = d.fy, fp = d.fp;
    const double ry = fp / y;                      // (1/y) f_phi
    const double mixed = d.fyp / y - fp / (y * y); // d_y((1/y) f_phi)
    const double tang = fy / y + d.fpp / (y * y);
    CartDerivs o{};
    o.f = d.f;
    o.g1 = c * fy - s * ry;
    o.g2 = s * fy + c * ry;
    o.h11 = c * c * d.fyy + s * s * tang - 2 * c * s * mixed;
    o.h22 = s * s * d.fyy + c * c * tang + 2 * c * s * mixed;
    o.h12 = c * s * (d.fyy - tang) + (c * c - s * s) * mixed;
    return o;
}

const FourierDiff& fourier_diff(int n) {
    static std::mutex mu;
    static std::map<int, FourierDiff> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    FourierDiff D;
    D.n = n;
    D.d1.assign(static_cast<size_t>(n) * n, 0.0);
    D.d2.assign(static_cast<size_t>(n) * n, 0.0);
    const double h = 2 * std::numbers::pi / n;
    // Standard even-n periodic spectral differentiation entries.
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            const int k = a - b;
            if (k == 0) {
                D.d2[a * n + b] = -std::numbers::pi * std::numbers::pi / (3 * h * h) - 1.0 / 6.0;
                continue;
            }
            const double x = k * h / 2;
            const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
            D.d1[a * n + b] = 0.5 * sgn / std::tan(x);
            D.d2[a * n + b] = -0.5 * sgn / (std::sin(x) * std::sin(x));
        }
    return cache.emplace(n, std::move(D)).first->second;
}

} // namespace ovalab
