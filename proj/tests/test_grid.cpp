#include "doctest.h"

#include "ovalab/errors.hpp"
#include "ovalab/grid.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace ovalab;
constexpr double pi = std::numbers::pi;

namespace {

// \int_0^\infty y^{2k+1} e^{-y^2/4} dy = 2 * 4^k * k!
double moment(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return 2.0 * std::pow(4.0, k) * f;
}

} // namespace

TEST_CASE("weights sum to the Gaussian mass") {
    auto g = build_grid(256, 64, 20.0);
    double s = 0.0;
    for (int i = 0; i <= g->n_r(); ++i)
        for (int j = 0; j < g->n_phi(); ++j) s += g->weight(i, j);
    CHECK(std::abs(s / (4 * pi) - 1.0) < 1e-6);

    auto coarse = build_grid(8, 4, 20.0);
    double sc = 0.0;
    for (int i = 0; i <= coarse->n_r(); ++i)
        for (int j = 0; j < coarse->n_phi(); ++j) sc += coarse->weight(i, j);
    CHECK(std::abs(sc / (4 * pi) - 1.0) < 0.05);
}

TEST_CASE("invalid sizes are rejected") {
    CHECK_THROWS_AS(build_grid(256, 3, 20.0), Error);
    CHECK_THROWS_AS(build_grid(4, 8, 20.0), Error);
    CHECK_THROWS_AS(build_grid(64, 8, -1.0), Error);
}

TEST_CASE("inner products match Gaussian moments") {
    auto g = build_grid(256, 64, 20.0);
    auto one = ScalarField(g, 1.0);
    auto c1 = sample(g, [](double y, double p) { return y * std::cos(p); });
    auto s1 = sample(g, [](double y, double p) { return y * std::sin(p); });
    auto q = sample(g, [](double y, double) { return y * y - 4; });
    CHECK(std::abs(inner_product_H(one, one) - 4 * pi) < 1e-9);
    CHECK(std::abs(inner_product_H(c1, s1)) < 1e-12);
    // (y^2-4)^2 = y^4 - 8y^2 + 16 against y e^{-y^2/4} dy times 2 pi
    const double oracle = (moment(2) - 8 * moment(1) + 16 * moment(0)) * 2 * pi;
    CHECK(std::abs(oracle - 64 * pi) < 1e-12);
    CHECK(std::abs(inner_product_H(q, q) / oracle - 1.0) < 1e-6);
}

TEST_CASE("eigenfunction Gram matrix is diagonal") {
    auto g = build_grid(256, 64, 20.0);
    std::vector<ScalarField> basis = {
        ScalarField(g, 1.0),
        sample(g, [](double y, double p) { return y * std::cos(p); }),
        sample(g, [](double y, double p) { return y * std::sin(p); }),
        sample(g, [](double y, double) { return y * y - 4; }),
        sample(g, [](double y, double p) { return y * y * std::cos(2 * p); }),
        sample(g, [](double y, double p) { return y * y * std::sin(2 * p); }),
    };
    const double diag[6] = {4 * pi, 8 * pi, 8 * pi, 64 * pi, 64 * pi, 64 * pi};
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
            const double ip = inner_product_H(basis[a], basis[b]);
            if (a == b)
                CHECK(std::abs(ip / diag[a] - 1.0) < 1e-6);
            else
                CHECK(std::abs(ip) < 1e-8);
        }
}

TEST_CASE("shape mismatch is an error") {
    auto g1 = build_grid(16, 8, 10.0);
    auto g2 = build_grid(32, 8, 10.0);
    CHECK_THROWS_AS(inner_product_H(ScalarField(g1, 1.0), ScalarField(g2, 1.0)), Error);
}

TEST_CASE("finite differences") {
    auto g = build_grid(64, 32, 8.0);
    auto c = ScalarField(g, 3.0);
    for (auto dir : {Direction::y, Direction::phi})
        for (int order : {1, 2}) {
            auto d = diff(c, dir, order);
            for (double x : d.values()) CHECK(x == 0.0);
        }
    auto y2 = sample(g, [](double y, double) { return y * y; });
    auto dy = diff(y2, Direction::y, 1);
    for (int i = 0; i <= g->n_r(); ++i) CHECK(std::abs(dy(i, 5) - 2 * g->y(i)) < 1e-10);

    auto s = sample(g, [](double, double p) { return std::sin(p); });
    auto dpp = diff(s, Direction::phi, 2);
    const double h = g->dphi();
    for (int j = 0; j < g->n_phi(); ++j) CHECK(std::abs(dpp(10, j) + std::sin(g->phi(j))) < h * h);
}

TEST_CASE("finite differences converge at second order") {
    auto err = [](int n) {
        auto g = build_grid(n, n / 2, 4.0);
        auto f = sample(g, [](double y, double p) {
            const double x1 = y * std::cos(p), x2 = y * std::sin(p);
            return std::exp(-0.3 * x1 * x1 - 0.2 * x2 * x2 + 0.1 * x1);
        });
        auto dy = diff(f, Direction::y, 2);
        double e = 0.0;
        for (int i = 0; i <= g->n_r(); ++i)
            for (int j = 0; j < g->n_phi(); ++j) {
                const double y = g->y(i), p = g->phi(j);
                const double c = std::cos(p), s = std::sin(p);
                // second derivative along the ray of exp(q(y c, y s))
                const double a = -0.3 * c * c - 0.2 * s * s;
                const double q1 = 2 * a * y + 0.1 * c;
                const double val = std::exp(a * y * y + 0.1 * c * y);
                e = std::max(e, std::abs(dy(i, j) - (q1 * q1 + 2 * a) * val));
            }
        return e;
    };
    const double e1 = err(32), e2 = err(64);
    CHECK(std::log2(e1 / e2) >= 1.9);
}

TEST_CASE("csv round trip") {
    auto g = build_grid(16, 8, 6.0, Stretching::tanh_clustered, {2.0, 0.3, 5.0});
    auto f = sample(g, [](double y, double p) { return std::sqrt(2.0) + 0.1 * y * std::cos(p) + 1e-13 * y; });
    std::stringstream ss;
    write_field_csv(ss, f);
    auto header = ss.str().substr(0, ss.str().find('\n'));
    CHECK(header.rfind("# y_nodes=16 phi_nodes=8 y_max=", 0) == 0);
    auto r = read_field_csv(ss);
    CHECK(r.grid().same_as(*g));
    CHECK(r.values() == f.values());
}

TEST_CASE("tanh clustering concentrates nodes") {
    auto g = build_grid(64, 8, 10.0, Stretching::tanh_clustered, {5.0, 0.2, 30.0});
    const int i = g->locate(5.0);
    const double near = g->y(i + 1) - g->y(i);
    const double far = g->y(1) - g->y(0);
    CHECK(near < far / 5);
}
