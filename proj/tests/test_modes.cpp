#include "doctest.h"

#include "ovalab/modes.hpp"

#include <cmath>
#include <complex>
#include <random>

using namespace ovalab;
const double s2 = std::sqrt(2.0), s8 = std::sqrt(8.0);

TEST_CASE("attractor solves the alpha system") {
    const double tau = -7.0;
    const double a = 1 / (s8 * tau);
    auto d = alpha_rhs({a, a, 0});
    CHECK(d[0] == doctest::Approx(-1 / (s8 * tau * tau)));
    CHECK(d[2] == 0.0);
    auto z = alpha_rhs({0, 0, 0});
    CHECK(z[0] == 0.0);

    auto tr = integrate(ModeSystem::alpha, {1 / (s8 * -20.0), 1 / (s8 * -20.0), 0.0}, -20.0, -10.0, 1e-3);
    double worst = 0.0;
    for (size_t k = 0; k < tr.t.size(); ++k) worst = std::max(worst, std::abs(tr.y[k][0] - 1 / (s8 * tr.t[k])));
    CHECK(worst < 1e-8);
}

TEST_CASE("attractor solves the S D system") {
    for (double tau : {-3.0, -10.0, -50.0}) {
        const double S = 1 / (s2 * tau), D = 1 / (8 * tau * tau);
        auto d = sd_rhs({S, D});
        CHECK(d[0] == doctest::Approx(-1 / (s2 * tau * tau)));
        CHECK(d[1] == doctest::Approx(-1 / (4 * tau * tau * tau)));
    }
    auto r = sd_rhs({0.3, 0.0});
    CHECK(r[0] == doctest::Approx(-s8 * 0.09));
    CHECK(r[1] == 0.0);

    auto tr = integrate(ModeSystem::sd, {1 / (s2 * -5.0), 1 / (200.0)}, -5.0, -4.0, 1e-3);
    for (size_t k = 0; k < tr.t.size(); ++k) {
        CHECK(std::abs(tr.y[k][0] - 1 / (s2 * tr.t[k])) < 1e-8);
        CHECK(std::abs(tr.y[k][1] - 1 / (8 * tr.t[k] * tr.t[k])) < 1e-8);
    }
}

TEST_CASE("S and D follow the alpha trajectory") {
    const std::vector<double> a0 = {-0.02, -0.05, 0.01};
    auto ta = integrate(ModeSystem::alpha, a0, -10.0, -9.0, 1e-3);
    auto ts = integrate(ModeSystem::sd, {a0[0] + a0[1], a0[0] * a0[1] - a0[2] * a0[2]}, -10.0, -9.0, 1e-3);
    REQUIRE(ta.t.size() == ts.t.size());
    for (size_t k = 0; k < ta.t.size(); ++k) {
        const auto& a = ta.y[k];
        CHECK(std::abs(a[0] + a[1] - ts.y[k][0]) < 1e-9);
        CHECK(std::abs(a[0] * a[1] - a[2] * a[2] - ts.y[k][1]) < 1e-9);
    }
}

TEST_CASE("matrix Riccati flow commutes with rotations") {
    const std::vector<double> a0 = {-0.03, -0.01, 0.008};
    const double th = 0.7, c = std::cos(th), s = std::sin(th);
    // R M R^T for M = [[a1, a3], [a3, a2]]
    auto rotate = [&](const std::vector<double>& a) {
        const double m11 = c * c * a[0] - 2 * c * s * a[2] + s * s * a[1];
        const double m22 = s * s * a[0] + 2 * c * s * a[2] + c * c * a[1];
        const double m12 = c * s * (a[0] - a[1]) + (c * c - s * s) * a[2];
        return std::vector<double>{m11, m22, m12};
    };
    auto t1 = integrate(ModeSystem::alpha, a0, -5.0, -4.0, 1e-3);
    auto t2 = integrate(ModeSystem::alpha, rotate(a0), -5.0, -4.0, 1e-3);
    const auto r1 = rotate(t1.y.back());
    for (int i = 0; i < 3; ++i) CHECK(std::abs(r1[i] - t2.y.back()[i]) < 1e-8);
}

TEST_CASE("xi linearization") {
    auto J = xi_jacobian({0, 0});
    CHECK(J[0][0] == -3.0);
    CHECK(J[0][1] == 1.0);
    CHECK(J[1][0] == -2.0);
    CHECK(J[1][1] == 0.0);
    const double tr = J[0][0] + J[1][1], det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    const auto disc = std::sqrt(std::complex<double>(tr * tr / 4 - det));
    const double l1 = (tr / 2 - disc).real(), l2 = (tr / 2 + disc).real();
    CHECK(std::abs(l1 + 2) < 1e-10);
    CHECK(std::abs(l2 + 1) < 1e-10);
    auto z = xi_rhs(0.0, {0, 0});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
}

TEST_CASE("xi round trip and decay") {
    const double tau = -12.5;
    auto xi = xi_from_sd(tau, -0.04, 0.0009);
    auto sd = sd_from_xi(tau, xi);
    CHECK(sd[0] == doctest::Approx(-0.04).epsilon(1e-15));
    CHECK(sd[1] == doctest::Approx(0.0009).epsilon(1e-15));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int n = 0; n < 100; ++n) {
        double x0, y0;
        do {
            x0 = 0.05 * U(rng);
            y0 = 0.05 * U(rng);
        } while (std::hypot(x0, y0) > 0.05);
        auto tr = integrate(ModeSystem::xi, {x0, y0}, 0.0, 10.0, 1e-2);
        const double r0 = std::hypot(x0, y0);
        for (size_t k = 0; k < tr.t.size(); ++k) {
            const double r = std::hypot(tr.y[k][0], tr.y[k][1]);
            CHECK(r <= 0.1);
            if (tr.t[k] >= 5.0) CHECK(r <= 2 * r0 * std::exp(-tr.t[k] / 2));
        }
    }
}

TEST_CASE("xi integrator is fourth order") {
    auto end = [](double h) { return integrate(ModeSystem::xi, {0.3, -0.2}, 0.0, 2.0, h).y.back(); };
    const auto a = end(0.1), b = end(0.05), c = end(0.025);
    const double e1 = std::hypot(a[0] - b[0], a[1] - b[1]), e2 = std::hypot(b[0] - c[0], b[1] - c[1]);
    CHECK(std::log2(e1 / e2) > 3.7);
}

TEST_CASE("large negative trace blows up early") {
    auto tr = integrate(ModeSystem::sd, {-0.5, 0.0}, -10.0, 0.0, 1e-3);
    CHECK(tr.blew_up);
    // Scalar Riccati: S = 1/(sqrt8 (tau - tau0) + 1/S0) blows up at tau0 - 1/(sqrt8 S0).
    CHECK(tr.blowup_time == doctest::Approx(-10.0 + 1 / (s8 * 0.5)).epsilon(1e-3));
}

TEST_CASE("positive trace decays without blow-up") {
    // Eigenvalues of the Riccati matrix evolve as 1/(1/l0 + sqrt8 (tau - tau0)).
    auto tr = integrate(ModeSystem::sd, {0.5, 0.0}, -10.0, 0.0, 1e-3);
    CHECK_FALSE(tr.blew_up);
    CHECK(tr.y.back()[0] == doctest::Approx(1 / (2.0 + s8 * 10.0)).epsilon(1e-9));
}

TEST_CASE("dense output") {
    auto tr = integrate(ModeSystem::alpha, {1 / (s8 * -20.0), 1 / (s8 * -20.0), 0.0}, -20.0, -10.0, 0.01);
    const auto m = tr.at(-13.337);
    CHECK(std::abs(m[0] - 1 / (s8 * -13.337)) < 1e-8);
}

TEST_CASE("noise hook stays bounded") {
    auto noise = bounded_noise(0.1, 3);
    const std::vector<double> a = {0.01, 0.02, -0.01};
    auto e = noise(-50.0, a);
    double n2 = 0.0, e2 = 0.0;
    for (size_t k = 0; k < 3; ++k) {
        n2 += a[k] * a[k];
        e2 += e[k] * e[k];
    }
    CHECK(std::sqrt(e2) <= 0.1 * n2 / std::pow(50.0, 0.05) + 1e-18);
}
