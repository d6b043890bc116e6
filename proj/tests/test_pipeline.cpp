#include "doctest.h"

#include "ovalab/diagnostics.hpp"
#include "ovalab/errors.hpp"
#include "ovalab/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

using namespace ovalab;
namespace fs = std::filesystem;

TEST_CASE("target density") {
    CHECK(theta_star() == doctest::Approx(1.495933).epsilon(1e-6));
    CHECK(theta_star() > 4 / std::numbers::e);
    CHECK(theta_star() < std::sqrt(2 * std::numbers::pi / std::numbers::e));
}

TEST_CASE("configuration round trip") {
    ExperimentConfig cfg;
    cfg.n_r = 100;
    cfg.n_phi = 36;
    cfg.y_max = 15.5;
    cfg.theta = 0.15;
    cfg.sweep_a = {0.3, 0.5, 0.7};
    cfg.tau0 = -6.25;
    cfg.rel_tol = 1.0 / 3.0;
    cfg.out_dir = "some where";
    cfg.threads = 3;
    const std::string text = print_config(cfg);
    CHECK(text.find("[grid]") != std::string::npos);
    CHECK(text.find("# ") != std::string::npos);
    std::istringstream is(text);
    const ExperimentConfig back = read_config(is);
    CHECK(back.n_r == 100);
    CHECK(back.n_phi == 36);
    CHECK(back.y_max == 15.5);
    CHECK(back.theta == 0.15);
    CHECK(back.sweep_a == cfg.sweep_a);
    CHECK(back.tau0 == -6.25);
    CHECK(back.rel_tol == cfg.rel_tol);
    CHECK(back.out_dir == "some where");
    CHECK(back.threads == 3);
    CHECK(print_config(back) == text);
}

TEST_CASE("configuration errors") {
    std::istringstream unknown("[grid]\nn_rr = 10\n");
    CHECK_THROWS_AS(read_config(unknown), Error);
    std::istringstream bad("[grid]\nn_r = ten\n");
    CHECK_THROWS_AS(read_config(bad), Error);
    std::istringstream frac("[grid]\nn_r = 10.5\n");
    CHECK_THROWS_AS(read_config(frac), Error);

    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    for (auto [key, value] : std::vector<std::pair<std::string, std::string>>{{"grid.n_phi", "30"},
                                                                               {"sweep.tau0", "-0.5"},
                                                                               {"sweep.a", "[0.5, 1.2]"},
                                                                               {"normalize.target_density", "1.6"},
                                                                               {"regions.theta", "0"},
                                                                               {"sweep.delta", "-1"}}) {
        ExperimentConfig c;
        set_config_value(c, key, value);
        CHECK_THROWS_AS(c.validate(), Error);
    }
    ExperimentConfig c;
    CHECK_THROWS_AS(set_config_value(c, "grid.nope", "1"), Error);
    set_config_value(c, "sweep.a", "0.2,0.8");
    CHECK(c.sweep_a == std::vector<double>{0.2, 0.8});
    // Partial files keep the remaining defaults.
    std::istringstream part("[sweep]\nkappa = 2\n");
    auto p = read_config(part);
    CHECK(p.kappa == 2.0);
    CHECK(p.n_r == ExperimentConfig{}.n_r);
}

TEST_CASE("worker count") {
    ExperimentConfig cfg;
    cfg.threads = 5;
    CHECK(worker_count(cfg) == 5);
    cfg.threads = 0;
    ::setenv("OVALAB_THREADS", "3", 1);
    CHECK(worker_count(cfg) == 3);
    ::unsetenv("OVALAB_THREADS");
    CHECK(worker_count(cfg) >= 1);
}

TEST_CASE("sweep table round trip") {
    SweepRow a;
    a.a = 0.4;
    a.ok = true;
    a.kappa_measured = 1.25;
    a.R = 0.1 / 3;
    a.Q_eig1 = -0.3;
    a.Q_eig2 = -0.1;
    a.collar_dev = std::numeric_limits<double>::quiet_NaN();
    a.concavity_margin = 0.5;
    a.t_e = -0.52;
    a.lambda = 700.25;
    a.b = -0.01;
    a.Gamma = -0.7;
    a.jacobian_det = 480.0;
    a.kappa_quadratic = true;
    SweepRow b;
    b.a = 0.6;
    b.error = "NormalizationError: bad, worse\nworst";
    std::stringstream ss;
    write_sweep_csv(ss, {a, b});
    auto rows = read_sweep_csv(ss);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].a == a.a);
    CHECK(rows[0].ok);
    CHECK(rows[0].R == a.R);
    CHECK(std::isnan(rows[0].collar_dev));
    CHECK(rows[0].lambda == a.lambda);
    CHECK(rows[0].kappa_quadratic);
    CHECK(rows[0].error.empty());
    CHECK(!rows[1].ok);
    CHECK(rows[1].error == "NormalizationError: bad; worse worst");
    std::istringstream junk("a,b\n1,2\n");
    CHECK_THROWS_AS(read_sweep_csv(junk), Error);
}

TEST_CASE("history files round trip") {
    auto g = build_grid(20, 8, 5.0);
    SnapshotHistory h;
    for (int k = 0; k < 3; ++k)
        h.push_square(-2.0 + 0.5 * k, sample(g, [&](double y, double p) { return 6 - y * y + 0.1 * k * std::cos(p); }));
    const fs::path dir = fs::temp_directory_path() / "ovalab_history_test";
    fs::remove_all(dir);
    write_history(dir.string(), h);
    auto back = read_history(dir.string());
    REQUIRE(back->snapshots().size() == 3);
    for (size_t k = 0; k < 3; ++k) {
        CHECK(back->snapshots()[k].tau == h.snapshots()[k].tau);
        CHECK(back->snapshots()[k].q.values() == h.snapshots()[k].q.values());
    }
    CHECK(back->value(0.3, 0.2, -1.3) == h.value(0.3, 0.2, -1.3));
    fs::resize_file(dir / "q.f64", 100);
    CHECK_THROWS_AS(read_history(dir.string()), Error);
    fs::remove_all(dir);
    CHECK_THROWS_AS(read_history(dir.string()), Error);
}

TEST_CASE("square_at interpolates linearly in tau") {
    auto g = build_grid(20, 8, 5.0);
    SnapshotHistory h;
    h.push_square(0.0, ScalarField(g, 1.0));
    h.push_square(1.0, ScalarField(g, 3.0));
    CHECK(square_at(h, 0.25).values()[7] == doctest::Approx(1.5));
    CHECK(square_at(h, 1.0).values()[0] == 3.0);
    CHECK_THROWS_AS(square_at(h, 1.5), Error);
}

TEST_CASE("normalized ellipsoid flow") {
    // Successive refinements move lambda by less each time.
    ExperimentConfig cfg;
    cfg.ell = 2.0;
    cfg.rel_tol = 1e-8;
    cfg.snapshot_every = 0.1;
    std::vector<double> lambdas;
    for (auto [n_r, n_phi] : {std::pair{64, 16}, std::pair{96, 24}, std::pair{144, 32}}) {
        cfg.n_r = n_r;
        cfg.n_phi = n_phi;
        auto flow = normalize_ellipsoid(EllipsoidSpec{0.5, cfg.ell, cfg.R, cfg.T}, cfg);
        CHECK(flow.t_e > cfg.T);
        CHECK(flow.lambda == doctest::Approx(std::exp(0.5 * flow.tau_crossing)));
        CHECK(flow.history->covers(0.0));
        CHECK(huisken_renormalized(square_at(*flow.history, 0.0)) == doctest::Approx(theta_star()).epsilon(1e-6));
        lambdas.push_back(flow.lambda);
    }
    MESSAGE("lambda " << lambdas[0] << " " << lambdas[1] << " " << lambdas[2]);
    CHECK(std::abs(lambdas[2] - lambdas[1]) < 0.5 * std::abs(lambdas[1] - lambdas[0]));
    CHECK(lambdas[2] == doctest::Approx(lambdas[1]).epsilon(0.05));
}

TEST_CASE("sweep rows report failures") {
    ExperimentConfig cfg;
    cfg.n_r = 32;
    cfg.n_phi = 8;
    cfg.y_max = 2.0;
    auto row = sweep_row(0.5, cfg);
    CHECK(!row.ok);
    CHECK(!row.error.empty());
    CHECK(row.seconds >= 0.0);
}
