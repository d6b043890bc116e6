#include "ovalab/shrinkers.hpp"

#include "ovalab/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ovalab {

namespace {

const double sqrt2 = std::sqrt(2.0);

double clamp_root(double q) { return q > 0.0 ? std::sqrt(q) : 0.0; }

std::array<double, 2> bowl_rhs(double rho, const std::array<double, 2>& s) {
    return {s[1], bowl_second_derivative(rho, s[1])};
}

std::array<double, 2> rk4(double rho, const std::array<double, 2>& s, double h) {
    auto add = [](const std::array<double, 2>& a, const std::array<double, 2>& b, double c) {
        return std::array<double, 2>{a[0] + c * b[0], a[1] + c * b[1]};
    };
    const auto k1 = bowl_rhs(rho, s);
    const auto k2 = bowl_rhs(rho + h / 2, add(s, k1, h / 2));
    const auto k3 = bowl_rhs(rho + h / 2, add(s, k2, h / 2));
    const auto k4 = bowl_rhs(rho + h, add(s, k3, h));
    return {s[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            s[1] + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

} // namespace

ScalarField bubble_sheet_field(GridPtr grid) { return ScalarField(std::move(grid), sqrt2); }

ScalarField sphere_field(GridPtr grid) {
    return sample(std::move(grid), [](double y, double) { return clamp_root(6.0 - y * y); });
}

ScalarField neck_field(GridPtr grid) {
    return sample(std::move(grid), [](double y, double p) {
        const double y2 = y * std::sin(p);
        return clamp_root(4.0 - y2 * y2);
    });
}

double bowl_second_derivative(double rho, double dz) {
    return -(1.0 + dz * dz) * (dz / rho + 1.0 / sqrt2);
}

BowlProfile::BowlProfile(double drho, std::vector<double> rho, std::vector<double> z, std::vector<double> dz)
    : h_(drho), rho_(std::move(rho)), z_(std::move(z)), dz_(std::move(dz)) {}

double BowlProfile::value(double r) const {
    require(r >= 0.0 && r <= rho_max() * (1 + 1e-12), ErrorKind::domain, "rho outside the bowl table");
    const int n = static_cast<int>(rho_.size()) - 1;
    const int k = std::min(static_cast<int>(r / h_), n - 1);
    const double t = (r - rho_[k]) / h_;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * z_[k] + h10 * h_ * dz_[k] + h01 * z_[k + 1] + h11 * h_ * dz_[k + 1];
}

double BowlProfile::deriv(double r) const {
    require(r >= 0.0 && r <= rho_max() * (1 + 1e-12), ErrorKind::domain, "rho outside the bowl table");
    const int n = static_cast<int>(rho_.size()) - 1;
    const int k = std::min(static_cast<int>(r / h_), n - 1);
    // Hermite interpolation of Z' using Z'' from the ODE at both ends.
    const double t = (r - rho_[k]) / h_;
    const double s0 = k == 0 ? -sqrt2 / 4 : bowl_second_derivative(rho_[k], dz_[k]);
    const double s1 = bowl_second_derivative(rho_[k + 1], dz_[k + 1]);
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * dz_[k] + h10 * h_ * s0 + h01 * dz_[k + 1] + h11 * h_ * s1;
}

double BowlProfile::second(double r) const {
    if (r < 1e-8) return -sqrt2 / 4;
    return bowl_second_derivative(r, deriv(r));
}

double BowlProfile::rescaled(double v, double tau) const {
    const double s = std::sqrt(std::abs(tau));
    return value(s * v) / s;
}

double BowlProfile::rescaled_deriv(double v, double tau) const {
    return deriv(std::sqrt(std::abs(tau)) * v);
}

BowlProfile solve_bowl(double rho_max, double drho) {
    require(rho_max >= 1.0, ErrorKind::parameter, "rho_max must be at least 1");
    require(drho > 0.0 && drho <= 1e-2, ErrorKind::parameter, "drho must lie in (0, 1e-2]");
    const int n = static_cast<int>(std::ceil(rho_max / drho - 1e-9));
    const double h = rho_max / n;
    // Two-term series Z = -sqrt2 rho^2/8 + c rho^4 with c = -sqrt2/512 balances
    // the rho^2 terms of the ODE.
    const double c = -sqrt2 / 512.0;
    auto series = [&](double r) {
        return std::array<double, 2>{-sqrt2 * r * r / 8 + c * r * r * r * r, -sqrt2 * r / 4 + 4 * c * r * r * r};
    };
    std::vector<double> rho(n + 1), z(n + 1), dz(n + 1);
    const int start = std::min(10, n);
    for (int k = 0; k <= start; ++k) {
        rho[k] = k * h;
        const auto s = series(rho[k]);
        z[k] = s[0];
        dz[k] = s[1];
    }
    std::array<double, 2> s{z[start], dz[start]};
    for (int k = start; k < n; ++k) {
        const double r = k * h;
        auto next = rk4(r, s, h);
        if ((k - start) % 256 == 0) {
            // Step-doubling error estimate.
            const auto half = rk4(r + h / 2, rk4(r, s, h / 2), h / 2);
            const double err = std::max(std::abs(half[0] - next[0]), std::abs(half[1] - next[1])) / 15.0;
            require(err <= 1e-9 * std::max(1.0, std::abs(next[0])), ErrorKind::accuracy,
                    "bowl step too large for the local error tolerance");
        }
        s = next;
        rho[k + 1] = (k + 1) * h;
        z[k + 1] = s[0];
        dz[k + 1] = s[1];
    }
    return BowlProfile(h, std::move(rho), std::move(z), std::move(dz));
}

void validate(const EllipsoidSpec& s) {
    require(s.a > 0.0 && s.a < 1.0, ErrorKind::parameter, "ellipsoid a must lie in (0,1)");
    require(s.ell > 0.0 && s.R > 0.0, ErrorKind::parameter, "ellipsoid ell and R must be positive");
    require(s.T < 0.0, ErrorKind::parameter, "ellipsoid start time must be negative");
}

double ellipsoid_q(const EllipsoidSpec& s, double x1, double x2) {
    const double c1 = s.a / s.ell, c2 = (1.0 - s.a) / s.ell;
    return s.R * s.R - c1 * c1 * x1 * x1 - c2 * c2 * x2 * x2;
}

ScalarField ellipsoid_initial(const EllipsoidSpec& spec, GridPtr grid) {
    validate(spec);
    return sample(std::move(grid), [&](double y, double p) {
        return clamp_root(ellipsoid_q(spec, y * std::cos(p), y * std::sin(p)));
    });
}

} // namespace ovalab
