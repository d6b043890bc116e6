#include "ovalab/modes.hpp"

#include "ovalab/errors.hpp"
#include "ovalab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ovalab {

namespace {
const double sqrt2 = std::sqrt(2.0);
const double sqrt8 = std::sqrt(8.0);
} // namespace

ModeState derive(double tau, const Alpha& a) {
    ModeState m;
    m.tau = tau;
    m.alpha = a;
    m.S = a[0] + a[1];
    m.D = a[0] * a[1] - a[2] * a[2];
    m.xi = xi_from_sd(tau, m.S, m.D);
    return m;
}

Alpha alpha_rhs(const Alpha& a) {
    return {-sqrt8 * (a[0] * a[0] + a[2] * a[2]), -sqrt8 * (a[1] * a[1] + a[2] * a[2]), -sqrt8 * (a[0] + a[1]) * a[2]};
}

Vec2 sd_rhs(const Vec2& sd) {
    const double S = sd[0], D = sd[1];
    return {-sqrt8 * (S * S - 2 * D), -sqrt8 * S * D};
}

Vec2 xi_rhs(double, const Vec2& x) {
    return {-3 * x[0] + x[1] - 2 * x[0] * x[0], -2 * x[0] - 2 * x[0] * x[1]};
}

std::array<std::array<double, 2>, 2> xi_jacobian(const Vec2& x) {
    return {{{-3 - 4 * x[0], 1.0}, {-2 - 2 * x[1], -2 * x[0]}}};
}

Vec2 xi_from_sd(double tau, double S, double D) { return {sqrt2 * tau * S - 1.0, 8 * tau * tau * D - 1.0}; }

Vec2 sd_from_xi(double tau, const Vec2& x) { return {(x[0] + 1.0) / (sqrt2 * tau), (x[1] + 1.0) / (8 * tau * tau)}; }

std::vector<double> mode_rhs(ModeSystem sys, double t, const std::vector<double>& y) {
    switch (sys) {
    case ModeSystem::alpha: {
        const auto d = alpha_rhs({y[0], y[1], y[2]});
        return {d[0], d[1], d[2]};
    }
    case ModeSystem::sd: {
        const auto d = sd_rhs({y[0], y[1]});
        return {d[0], d[1]};
    }
    case ModeSystem::xi: {
        const auto d = xi_rhs(t, {y[0], y[1]});
        return {d[0], d[1]};
    }
    }
    return {};
}

ModeNoise bounded_noise(double amplitude, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 2 * std::numbers::pi);
    std::array<double, 6> phase{}, freq{};
    for (int k = 0; k < 6; ++k) {
        phase[k] = U(rng);
        freq[k] = 0.5 + U(rng) / (2 * std::numbers::pi);
    }
    return [=](double t, const std::vector<double>& y) {
        double n2 = 0.0;
        for (double x : y) n2 += x * x;
        const double scale = amplitude * n2 / std::pow(std::max(1.0, std::abs(t)), 0.05);
        std::vector<double> e(y.size());
        for (size_t k = 0; k < y.size(); ++k) e[k] = scale * std::sin(freq[k % 6] * t + phase[k % 6]) / std::sqrt(double(y.size()));
        return e;
    };
}

std::vector<double> Trajectory::at(double time) const {
    require(!t.empty(), ErrorKind::coverage, "empty trajectory");
    const bool forward = t.back() >= t.front();
    const double lo = std::min(t.front(), t.back()), hi = std::max(t.front(), t.back());
    require(time >= lo - 1e-12 && time <= hi + 1e-12, ErrorKind::coverage, "time outside trajectory");
    if (t.size() == 1) return y.front();
    size_t k = 0;
    if (forward)
        k = std::upper_bound(t.begin(), t.end(), time) - t.begin();
    else
        k = std::upper_bound(t.begin(), t.end(), time, [](double a, double b) { return a > b; }) - t.begin();
    k = std::clamp<size_t>(k, 1, t.size() - 1) - 1;
    const double h = t[k + 1] - t[k];
    const double s = (time - t[k]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    std::vector<double> out(y[k].size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = h00 * y[k][i] + h10 * h * dy[k][i] + h01 * y[k + 1][i] + h11 * h * dy[k + 1][i];
    return out;
}

Trajectory integrate(ModeSystem sys, const std::vector<double>& init, double t0, double t1, double h,
                     const ModeNoise& noise) {
    const size_t dim = sys == ModeSystem::alpha ? 3 : 2;
    require(init.size() == dim, ErrorKind::parameter, "initial state has the wrong dimension");
    require(h > 0.0, ErrorKind::parameter, "step must be positive");
    auto f = [&](double t, const std::vector<double>& y) {
        auto d = mode_rhs(sys, t, y);
        if (noise) {
            const auto e = noise(t, y);
            for (size_t i = 0; i < d.size(); ++i) d[i] += e[i];
        }
        return d;
    };
    Trajectory tr;
    tr.system = sys;
    const int n = std::max(0, static_cast<int>(std::ceil(std::abs(t1 - t0) / h - 1e-9)));
    const double step = n > 0 ? (t1 - t0) / n : 0.0;
    std::vector<double> y = init;
    tr.t.push_back(t0);
    tr.y.push_back(y);
    tr.dy.push_back(f(t0, y));
    for (int k = 0; k < n; ++k) {
        const double t = t0 + k * step;
        const auto k1 = tr.dy.back();
        std::vector<double> tmp(dim);
        for (size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * step * k1[i];
        const auto k2 = f(t + 0.5 * step, tmp);
        for (size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * step * k2[i];
        const auto k3 = f(t + 0.5 * step, tmp);
        for (size_t i = 0; i < dim; ++i) tmp[i] = y[i] + step * k3[i];
        const auto k4 = f(t + step, tmp);
        std::vector<double> next(dim);
        double mag = 0.0;
        bool finite = true;
        for (size_t i = 0; i < dim; ++i) {
            next[i] = y[i] + step / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            mag = std::max(mag, std::abs(next[i]));
            finite = finite && std::isfinite(next[i]);
        }
        const double tn = (k + 1 == n) ? t1 : t0 + (k + 1) * step;
        if (!finite || mag > 1e6) {
            tr.blew_up = true;
            double prev = 0.0;
            for (double x : y) prev = std::max(prev, std::abs(x));
            // Locate the crossing of 1e6 by log-linear interpolation.
            double frac = 1.0;
            if (finite && mag > prev && prev > 0)
                frac = std::clamp((std::log(1e6) - std::log(prev)) / (std::log(mag) - std::log(prev)), 0.0, 1.0);
            tr.blowup_time = t + frac * step;
            break;
        }
        y = next;
        tr.t.push_back(tn);
        tr.y.push_back(y);
        tr.dy.push_back(f(tn, y));
    }
    return tr;
}

FlowComparison compare_with_flow(const ProfileHistory& history, const GridPtr& grid, double theta, double tau_a,
                                 double tau_b, double step) {
    require(tau_a < tau_b && tau_b < 0.0, ErrorKind::parameter, "window must satisfy tau_a < tau_b < 0");
    require(history.covers(tau_a, 1e-9) && history.covers(tau_b, 1e-9), ErrorKind::coverage,
            "history does not span the comparison window");
    const auto basis = eigen_basis(grid);
    FlowComparison out;
    const int n = std::max(1, static_cast<int>(std::ceil((tau_b - tau_a) / step - 1e-9)));
    for (int k = 0; k <= n; ++k) {
        const double tau = tau_a + (tau_b - tau_a) * k / n;
        const auto rep = project(history.field(grid, tau), theta, tau, basis);
        const double T = std::abs(tau);
        out.dev_diag = std::max({out.dev_diag, std::abs(T * rep.alpha[0] + 1 / sqrt8), std::abs(T * rep.alpha[1] + 1 / sqrt8)});
        out.dev_cross = std::max(out.dev_cross, std::abs(tau * rep.alpha[2]));
        out.samples.push_back(derive(tau, rep.alpha));
    }
    return out;
}

} // namespace ovalab
