#include "doctest.h"

#include "ovalab/errors.hpp"
#include "ovalab/recenter.hpp"
#include "ovalab/spectral.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

using namespace ovalab;
const double s2 = std::sqrt(2.0), s8 = std::sqrt(8.0);
const double pi = std::numbers::pi;

namespace {

GridPtr std_grid() {
    static const GridPtr g = build_grid(128, 32, 16.0);
    return g;
}

std::shared_ptr<AnalyticHistory> normal_form() {
    return std::make_shared<AnalyticHistory>(
        [](double y1, double y2, double tau) {
            const double v = s2 - (y1 * y1 + y2 * y2 - 4) / (s8 * std::abs(tau));
            return v > 0 ? v : 0.0;
        },
        -400.0, -20.0);
}

double max_diff(const ScalarField& a, const ScalarField& b) {
    double w = 0.0;
    for (size_t n = 0; n < a.values().size(); ++n) w = std::max(w, std::abs(a.values()[n] - b.values()[n]));
    return w;
}

} // namespace

TEST_CASE("raw and derived parameters") {
    for (double tau : {-3.0, -50.0}) {
        for (auto [b, G] : {std::pair{0.01, 0.2}, std::pair{-0.02, -0.3}, std::pair{0.0, 0.0}}) {
            auto p = TransformParams::from_derived(b, G, tau, {0.1, -0.2}, 0.4);
            CHECK(p.b(tau) == doctest::Approx(b).epsilon(1e-14));
            CHECK(p.Gamma(tau) == doctest::Approx(G).epsilon(1e-14));
            CHECK(p.a(tau)[0] == doctest::Approx(0.1).epsilon(1e-14));
            CHECK(p.source_tau(tau) == doctest::Approx((1 + G) * tau).epsilon(1e-14));
            CHECK(p.target_tau(p.source_tau(tau)) == doctest::Approx(tau).epsilon(1e-13));
            auto q = TransformParams::from_derived(p.b(tau), p.Gamma(tau), tau, p.a(tau), p.phi);
            CHECK(q.beta == doctest::Approx(p.beta).epsilon(1e-14));
            CHECK(q.gamma == doctest::Approx(p.gamma).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS(TransformParams::from_derived(-1.5, 0.0, -10.0), Error);
}

TEST_CASE("inverse and composition of transformations") {
    TransformParams p{{0.3, -0.1}, 0.02, 0.15, 0.7};
    TransformParams q{{-0.2, 0.05}, -0.01, -0.05, 0.3};
    auto id = p.then(p.inverse());
    CHECK(std::abs(id.beta) < 1e-15);
    CHECK(std::abs(id.gamma) < 1e-15);
    CHECK(std::abs(id.phi) < 1e-15);
    CHECK(std::abs(id.alpha[0]) < 1e-15);
    CHECK(std::abs(id.alpha[1]) < 1e-15);

    // Applying p and then q to a history equals applying the composite.
    auto base = std::make_shared<AnalyticHistory>(
        [](double y1, double y2, double tau) {
            return s2 + 0.05 * y1 - 0.02 * y1 * y2 + 0.01 * y2 * y2 - (y1 * y1 + y2 * y2) / (s8 * std::abs(tau));
        },
        -400.0, -5.0);
    auto twice = std::make_shared<TransformedHistory>(std::make_shared<TransformedHistory>(base, p), q);
    TransformedHistory once(base, p.then(q));
    for (double tau : {-60.0, -30.0})
        for (auto [y1, y2] : {std::pair{0.0, 0.0}, std::pair{1.3, -0.4}, std::pair{-2.0, 2.5}})
            CHECK(twice->value(y1, y2, tau) == doctest::Approx(once.value(y1, y2, tau)).epsilon(1e-12));
}

TEST_CASE("transform_profile closed forms") {
    auto g = std_grid();
    auto flat = std::make_shared<AnalyticHistory>([](double, double, double) { return s2; }, -400.0, -1.0);
    const double tau0 = -100.0;
    for (double b : {-0.05, 0.0, 0.1}) {
        const auto t = transform_profile(*flat, b, 0.3, tau0, g);
        for (double x : t.values()) CHECK(x == doctest::Approx(s2 * (1 + b)));
    }

    auto nf = normal_form();
    CHECK(max_diff(transform_profile(*nf, 0.0, 0.0, tau0, g), nf->field(g, tau0)) < 1e-14);

    const double b = 0.02, G = 0.1;
    auto t = transform_profile(*nf, b, G, tau0, g);
    auto expected = sample(g, [&](double y, double) {
        const double v = (1 + b) * s2 - ((y / (1 + b)) * (y / (1 + b)) - 4) * (1 + b) / (s8 * (1 + G) * -tau0);
        return std::max(v, 0.0);
    });
    CHECK(max_diff(t, expected) < 1e-12);
    CHECK_THROWS_AS(transform_profile(*nf, 0.0, 5.0, tau0, g), Error);
}

TEST_CASE("transform_full") {
    auto g = std_grid();
    const double tau0 = -100.0;
    auto nf = normal_form();
    auto a = transform_full(*nf, {0, 0}, 0.01, -0.1, 0.0, tau0, g);
    CHECK(!a.clamped);
    CHECK(max_diff(a.v, transform_profile(*nf, 0.01, -0.1, tau0, g)) < 1e-14);
    CHECK(max_diff(transform_full(*nf, {0, 0}, 0.0, 0.0, 1.1, tau0, g).v, nf->field(g, tau0)) < 1e-12);

    auto tilt = std::make_shared<AnalyticHistory>([](double y1, double, double) { return s2 + 0.01 * y1; }, -400.0, -1.0);
    const double h = 1e-3;
    auto moved = transform_full(*tilt, {h, 0.0}, 0.0, 0.0, 0.0, tau0, g);
    CHECK(moved.v(0, 0) == doctest::Approx(s2 - 0.01 * h).epsilon(1e-14));
    CHECK(transform_full(*nf, {30.0, 0.0}, 0.0, 0.0, 0.0, tau0, g).clamped);
}

TEST_CASE("psi pairings on the normal form") {
    auto g = build_grid(192, 48, 16.0);
    auto nf = normal_form();
    const double tau0 = -100.0;
    auto z = psi2(*nf, tau0, 0.0, 0.0, g);
    CHECK(std::abs(z[0]) < 1e-10);
    CHECK(std::abs(z[1]) < 1e-10);

    auto pb = psi2(*nf, tau0, 1e-3, 0.0, g);
    CHECK(pb[0] == doctest::Approx(s2 * 4 * pi * 1e-3).epsilon(0.02));

    const double G = 1e-2;
    auto pg = psi2(*nf, tau0, 0.0, G, g);
    CHECK(pg[1] == doctest::Approx(64 * pi * G / (s8 * -tau0 * (1 + G))).epsilon(1e-6));

    // Symmetric history: translation pairings vanish.
    auto p4 = psi4(*nf, tau0, {0.0, 0.0}, 0.01, 0.05, g);
    auto p2 = psi2(*nf, tau0, 0.01, 0.05, g);
    CHECK(std::abs(p4[1]) < 1e-12);
    CHECK(std::abs(p4[2]) < 1e-12);
    CHECK(p4[0] == doctest::Approx(p2[0]).epsilon(1e-14));
    CHECK(p4[3] == doctest::Approx(p2[1]).epsilon(1e-14));

    // A translation costs -|a|^2/(sqrt8 |tau0|) in the constant mode.
    const std::array<double, 2> a{0.3, 0.2};
    auto pa = psi4(*nf, tau0, a, 0.0, 0.0, g);
    CHECK(pa[0] == doctest::Approx(-4 * pi * (a[0] * a[0] + a[1] * a[1]) / (s8 * -tau0)).epsilon(1e-6));
}

TEST_CASE("Jacobian determinant on the normal form") {
    auto g = build_grid(192, 48, 18.0);
    auto nf = normal_form();
    std::vector<double> dets;
    for (double tau0 : {-50.0, -100.0, -200.0}) {
        const double det = jacobian_det(*nf, tau0, 0.0, 0.0, g);
        CHECK(det > 0.0);
        CHECK(det == doctest::Approx(128 * pi * pi / -tau0).epsilon(0.1));
        dets.push_back(det * -tau0);
    }
    CHECK(dets[1] == doctest::Approx(dets[0]).epsilon(0.1));
    CHECK(dets[2] == doctest::Approx(dets[0]).epsilon(0.1));
}

TEST_CASE("recentering recovers a known transformation") {
    auto g = build_grid(192, 48, 18.0);
    auto nf = normal_form();
    for (double tau0 : {-50.0, -100.0}) {
        auto P = TransformParams::from_derived(0.5 / -tau0, 0.01, tau0);
        auto moved = std::make_shared<TransformedHistory>(nf, P);
        auto r = solve_psi(*moved, tau0, g);
        auto inv = P.inverse();
        CHECK(r.b == doctest::Approx(inv.b(tau0)).epsilon(1e-8));
        CHECK(r.Gamma == doctest::Approx(inv.Gamma(tau0)).epsilon(1e-8));
        CHECK(r.residual < 1e-10);
        CHECK(r.jacobian_det > 0.0);
    }
    // A compliant history is its own zero.
    auto r0 = solve_psi(*nf, -100.0, g);
    CHECK(std::abs(r0.b) < 1e-10);
    CHECK(std::abs(r0.Gamma) < 1e-8);
    CHECK(r0.start == 0);
}

TEST_CASE("zeros are locally unique") {
    auto g = build_grid(96, 24, 16.0);
    auto nf = normal_form();
    const double tau0 = -100.0, kappa = 0.05;
    // A pure change of time scale: a time shift would grow like e^tau and
    // spoil the history over the later part of the box.
    auto moved = std::make_shared<TransformedHistory>(nf, TransformParams::from_derived(0.0, 0.005, tau0));
    SolveOptions opt;
    opt.kappa = kappa;
    auto ref = solve_psi(*moved, tau0, g, opt);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    int converged = 0;
    for (int s = 0; s < 20; ++s) {
        double u, w;
        do {
            u = U(rng);
            w = U(rng);
        } while (u * u + w * w > 1.0);
        auto r = solve_psi_from(*moved, tau0, g, {10 * kappa * u / -tau0, 10 * kappa * w}, opt);
        CHECK(r.b == doctest::Approx(ref.b).epsilon(1e-8));
        CHECK(r.Gamma == doctest::Approx(ref.Gamma).epsilon(1e-8));
        ++converged;
    }
    CHECK(converged == 20);
}

TEST_CASE("a history without a zero is reported") {
    auto g = build_grid(96, 24, 16.0);
    auto flat = std::make_shared<AnalyticHistory>([](double, double, double) { return s2; }, -400.0, -1.0);
    SolveOptions opt;
    opt.starts = 3;
    CHECK_THROWS_AS(solve_psi(*flat, -100.0, g, opt), Error);
}

TEST_CASE("rotation half-angle") {
    auto g = std_grid();
    const double phi0 = 0.3;
    auto f = sample(g, [&](double y, double p) { return s2 + 0.01 * y * y * std::cos(2 * (p - phi0)); });
    const double phi = rotation_angle(f);
    CHECK(phi >= 0.0);
    CHECK(phi < pi);
    CHECK(phi == doctest::Approx(pi - phi0).epsilon(1e-10));
    // f(R_{-phi} y) has no sin 2phi component and a positive cos 2phi one.
    auto rotated = sample(g, [&](double y, double p) { return s2 + 0.01 * y * y * std::cos(2 * (p - phi - phi0)); });
    auto c2 = sample(g, [](double y, double p) { return y * y * std::cos(2 * p); });
    auto sn2 = sample(g, [](double y, double p) { return y * y * std::sin(2 * p); });
    CHECK(std::abs(inner_product_H(rotated, sn2)) < 1e-10);
    CHECK(inner_product_H(rotated, c2) > 0.0);
}

TEST_CASE("four-parameter recentering") {
    auto g = build_grid(128, 32, 16.0);
    const double tau0 = -100.0, eps = 0.002, phi0 = 0.4;
    auto bent = std::make_shared<AnalyticHistory>(
        [&](double y1, double y2, double tau) {
            const double r2 = y1 * y1 + y2 * y2, p = std::atan2(y2, y1);
            const double v = s2 - (r2 - 4) / (s8 * std::abs(tau)) + eps * r2 * std::cos(2 * (p - phi0));
            return v > 0 ? v : 0.0;
        },
        -400.0, -20.0);
    auto moved = std::make_shared<TransformedHistory>(bent, TransformParams::from_derived(0.001, 0.01, tau0, {0.1, -0.05}));
    SolveOptions opt;
    opt.mode = SolveMode::four_param;
    auto r = solve_psi(*moved, tau0, g, opt);
    auto check = psi4(*moved, tau0, r.a, r.b, r.Gamma, g);
    for (double x : check) CHECK(std::abs(x) < 1e-9);
    CHECK(r.jacobian_det > 0.0);
    // The rotated, recentred profile is aligned with the axes.
    auto v = transform_full(*moved, r.a, r.b, r.Gamma, r.phi, tau0, g).v;
    auto sn2 = sample(g, [](double y, double p) { return y * y * std::sin(2 * p); });
    auto c2 = sample(g, [](double y, double p) { return y * y * std::cos(2 * p); });
    auto vc = truncate(v, opt.psi.theta);
    CHECK(std::abs(inner_product_H(vc, sn2)) < 1e-6 * std::abs(inner_product_H(vc, c2)));
    CHECK(inner_product_H(vc, c2) > 0.0);
}
