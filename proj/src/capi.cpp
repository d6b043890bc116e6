#include "ovalab/ovalab.h"

#include "ovalab/diagnostics.hpp"
#include "ovalab/errors.hpp"
#include "ovalab/evolve.hpp"
#include "ovalab/modes.hpp"
#include "ovalab/pipeline.hpp"
#include "ovalab/recenter.hpp"
#include "ovalab/shrinkers.hpp"
#include "ovalab/spectral.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <sstream>

using namespace ovalab;

struct ovl_grid {
    GridPtr g;
};
struct ovl_field {
    ScalarField f;
    ovl_grid grid;
};
struct ovl_history {
    std::shared_ptr<SnapshotHistory> h;
    ovl_grid grid;
};
struct ovl_bowl {
    BowlProfile b;
};
struct ovl_run {
    RunResult r;
    ovl_history history;
    ovl_field final;
};
struct ovl_trajectory {
    std::vector<std::array<double, 8>> rows;
    bool blew_up = false;
    double when = 0.0;
};
struct ovl_config {
    ExperimentConfig c;
};
struct ovl_flow {
    NormalizedFlow f;
    ovl_history history;
};
struct ovl_table {
    std::vector<SweepRow> rows;
};

namespace {

thread_local std::string last_error;

template <class F>
ovl_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return OVL_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return static_cast<ovl_status>(e.exit_code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return OVL_ERR_COVERAGE;
    } catch (const std::exception& e) {
        last_error = e.what();
        return OVL_ERR_NUMERICAL;
    }
}

void need(const void* p, const char* what) {
    require(p != nullptr, ErrorKind::parameter, std::string("null ") + what);
}

ovl_history wrap_history(std::shared_ptr<SnapshotHistory> h) {
    require(h && !h->empty(), ErrorKind::coverage, "history holds no snapshot");
    return ovl_history{h, ovl_grid{h->snapshots().front().q.grid_ptr()}};
}

char* copy_string(const std::string& s) {
    char* buf = new char[s.size() + 1];
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return buf;
}

ScalarField unsquare(const ScalarField& q) {
    ScalarField v(q.grid_ptr());
    for (size_t n = 0; n < q.values().size(); ++n) v.values()[n] = q.values()[n] > 0 ? std::sqrt(q.values()[n]) : 0.0;
    return v;
}

void fill_diagnostics(const FlowState& s, double delta, double eps, ovl_diagnostics* out) {
    static const BowlProfile bowl = solve_bowl(200.0, 1e-3);
    const double tau = s.tau;
    ovl_diagnostics d{};
    d.tau = tau;
    d.v_soliton = s.L / std::sqrt(std::abs(tau));
    d.v_collar = 2 * s.theta;
    const ConcavityReport cr = concavity_margin_renormalized(s.q, tau, delta);
    d.concavity_margin = cr.max_margin;
    d.concavity_y = cr.worst_y;
    d.concavity_phi = cr.worst_phi;
    try {
        const CollarReport col = collar_deviation(s.q, tau, s.theta, s.L);
        d.collar_deviation = col.deviation;
        d.collar_nodes = col.nodes;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::coverage) throw;
        d.collar_deviation = std::numeric_limits<double>::quiet_NaN();
    }
    d.cylindrical = cylindrical_estimate(s.q, tau, s.L);
    d.huisken = huisken_renormalized(s.q);
    const AsymptoticsReport ar = asymptotics_report(s, eps, bowl);
    d.parabolic = ar.parabolic;
    d.intermediate = ar.intermediate;
    d.tip = ar.tip;
    *out = d;
}

ovl_spectral to_c(const SpectralReport& r) {
    ovl_spectral o{};
    o.tau = r.tau;
    for (int k = 0; k < 6; ++k) o.coeff[k] = r.coeff[k];
    for (int k = 0; k < 3; ++k) o.alpha[k] = r.alpha[k];
    o.S = r.S;
    o.D = r.D;
    o.xi[0] = r.xi[0];
    o.xi[1] = r.xi[1];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) o.Q[i][j] = r.Q[i][j];
    o.Q_eig[0] = r.Q_eig[0];
    o.Q_eig[1] = r.Q_eig[1];
    o.stable_residual = r.stable_residual;
    return o;
}

} // namespace

extern "C" {

const char* ovl_version(void) { return "0.1.0"; }
const char* ovl_last_error(void) { return last_error.c_str(); }
void ovl_string_free(char* s) { delete[] s; }

ovl_status ovl_grid_new(int n_r, int n_phi, double y_max, ovl_grid** out) {
    return guarded([&] {
        need(out, "output");
        require(n_r >= 4 && n_phi >= 4 && n_phi % 2 == 0 && y_max > 0, ErrorKind::parameter,
                "grid needs n_r >= 4, even n_phi >= 4 and y_max > 0");
        *out = new ovl_grid{build_grid(n_r, n_phi, y_max)};
    });
}
ovl_status ovl_grid_new_clustered(int n_r, int n_phi, double y_max, double center, double width, double strength,
                                  ovl_grid** out) {
    return guarded([&] {
        need(out, "output");
        require(n_r >= 4 && n_phi >= 4 && n_phi % 2 == 0 && y_max > 0, ErrorKind::parameter,
                "grid needs n_r >= 4, even n_phi >= 4 and y_max > 0");
        require(center > 0 && center < y_max && width > 0 && strength >= 1, ErrorKind::parameter,
                "cluster needs 0 < center < y_max, width > 0 and strength >= 1");
        *out = new ovl_grid{build_grid(n_r, n_phi, y_max, Stretching::tanh_clustered, {center, width, strength})};
    });
}
void ovl_grid_free(ovl_grid* g) { delete g; }
void ovl_grid_shape(const ovl_grid* g, int* n_r, int* n_phi, double* y_max) {
    if (n_r) *n_r = g->g->n_r();
    if (n_phi) *n_phi = g->g->n_phi();
    if (y_max) *y_max = g->g->y_max();
}

ovl_status ovl_field_model(const ovl_grid* g, ovl_model model, double tau, ovl_field** out) {
    return guarded([&] {
        need(g, "grid");
        need(out, "output");
        ScalarField f;
        switch (model) {
        case OVL_MODEL_BUBBLE_SHEET: f = bubble_sheet_field(g->g); break;
        case OVL_MODEL_SPHERE: f = sphere_field(g->g); break;
        case OVL_MODEL_NECK: f = neck_field(g->g); break;
        case OVL_MODEL_NORMAL_FORM: {
            require(tau < 0, ErrorKind::parameter, "the normal form needs tau < 0");
            const double c = 1.0 / (std::sqrt(8.0) * std::abs(tau));
            f = sample(g->g, [&](double y, double) { return std::max(0.0, std::sqrt(2.0) - c * (y * y - 4)); });
            break;
        }
        case OVL_MODEL_OVAL: {
            require(tau < 0, ErrorKind::parameter, "the oval needs tau < 0");
            f = sample(g->g, [&](double y, double) { return std::sqrt(std::max(0.0, 2.0 - (y * y - 4) / std::abs(tau))); });
            break;
        }
        default: fail(ErrorKind::parameter, "unknown model");
        }
        *out = new ovl_field{std::move(f), *g};
    });
}

ovl_status ovl_field_ellipsoid(const ovl_grid* g, double a, double ell, double R, double T, ovl_field** out) {
    return guarded([&] {
        need(g, "grid");
        need(out, "output");
        *out = new ovl_field{ellipsoid_initial(EllipsoidSpec{a, ell, R, T}, g->g), *g};
    });
}

ovl_status ovl_field_from_values(const ovl_grid* g, const double* values, size_t n, ovl_field** out) {
    return guarded([&] {
        need(g, "grid");
        need(values, "values");
        need(out, "output");
        require(n == static_cast<size_t>(g->g->size()), ErrorKind::shape, "value count does not match the grid");
        *out = new ovl_field{ScalarField(g->g, std::vector<double>(values, values + n)), *g};
    });
}

ovl_status ovl_field_read_csv(const char* path, ovl_field** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "output");
        ScalarField f = read_field_csv(std::string(path));
        ovl_grid g{f.grid_ptr()};
        *out = new ovl_field{std::move(f), g};
    });
}

ovl_status ovl_field_write_csv(const ovl_field* f, const char* path) {
    return guarded([&] {
        need(f, "field");
        need(path, "path");
        write_field_csv(std::string(path), f->f);
    });
}

void ovl_field_values(const ovl_field* f, const double** values, size_t* n) {
    if (values) *values = f->f.values().data();
    if (n) *n = f->f.values().size();
}
const ovl_grid* ovl_field_grid(const ovl_field* f) { return &f->grid; }
void ovl_field_free(ovl_field* f) { delete f; }

ovl_status ovl_bowl_solve(double rho_max, double drho, ovl_bowl** out) {
    return guarded([&] {
        need(out, "output");
        *out = new ovl_bowl{solve_bowl(rho_max, drho)};
    });
}
size_t ovl_bowl_size(const ovl_bowl* b) { return b->b.rho().size(); }
void ovl_bowl_row(const ovl_bowl* b, size_t i, double* rho, double* z, double* dz) {
    if (rho) *rho = b->b.rho()[i];
    if (z) *z = b->b.z()[i];
    if (dz) *dz = b->b.dz()[i];
}
void ovl_bowl_free(ovl_bowl* b) { delete b; }

ovl_status ovl_shrinker_residual(const ovl_field* v, double v_min, double* sup) {
    return guarded([&] {
        need(v, "field");
        need(sup, "output");
        const ScalarField r = rhs_renormalized_v(v->f);
        double m = 0.0;
        for (size_t n = 0; n < r.values().size(); ++n)
            if (v->f.values()[n] >= v_min) m = std::max(m, std::abs(r.values()[n]));
        *sup = m;
    });
}

void ovl_run_options_default(ovl_run_options* opt) {
    const RunOptions ro;
    opt->theta = 0.2;
    opt->L = 10.0;
    opt->snapshot_every = ro.snapshot_every;
    opt->c_cfl = ro.c_cfl;
}

ovl_status ovl_simulate(const ovl_field* v, double tau_start, double tau_end, const ovl_run_options* opt,
                        ovl_run** out) {
    return guarded([&] {
        need(v, "field");
        need(out, "output");
        ovl_run_options o;
        ovl_run_options_default(&o);
        if (opt) o = *opt;
        require(tau_end > tau_start, ErrorKind::parameter, "tau_end must exceed tau_start");
        require(o.snapshot_every > 0 && o.c_cfl > 0, ErrorKind::parameter, "run options must be positive");
        RunOptions ro;
        ro.snapshot_every = o.snapshot_every;
        ro.c_cfl = o.c_cfl;
        RunResult r = run(make_renormalized(v->f, tau_start, o.theta, o.L), tau_end, ro);
        auto* res = new ovl_run{std::move(r), {}, {}};
        res->history = wrap_history(res->r.history);
        res->final = ovl_field{res->r.state.v(), res->history.grid};
        *out = res;
    });
}
int ovl_run_status(const ovl_run* r) { return static_cast<int>(r->r.status); }
int ovl_run_steps(const ovl_run* r) { return r->r.steps; }
double ovl_run_tau(const ovl_run* r) { return r->r.state.tau; }
const ovl_history* ovl_run_history(const ovl_run* r) { return &r->history; }
const ovl_field* ovl_run_final(const ovl_run* r) { return &r->final; }
ovl_status ovl_run_write_tip_csv(const ovl_run* r, const char* path) {
    return guarded([&] {
        need(path, "path");
        write_tip_csv(path, r->r.state.tip);
    });
}
void ovl_run_free(ovl_run* r) { delete r; }

ovl_status ovl_history_read(const char* dir, ovl_history** out) {
    return guarded([&] {
        need(dir, "directory");
        need(out, "output");
        *out = new ovl_history(wrap_history(read_history(dir)));
    });
}
ovl_status ovl_history_write(const ovl_history* h, const char* dir) {
    return guarded([&] {
        need(h, "history");
        need(dir, "directory");
        write_history(dir, *h->h);
    });
}
void ovl_history_range(const ovl_history* h, double* tau_min, double* tau_max) {
    if (tau_min) *tau_min = h->h->tau_min();
    if (tau_max) *tau_max = h->h->tau_max();
}
size_t ovl_history_count(const ovl_history* h) { return h->h->snapshots().size(); }
double ovl_history_tau(const ovl_history* h, size_t k) { return h->h->snapshots()[k].tau; }
const ovl_grid* ovl_history_grid(const ovl_history* h) { return &h->grid; }
ovl_status ovl_history_field(const ovl_history* h, double tau, ovl_field** out) {
    return guarded([&] {
        need(h, "history");
        need(out, "output");
        *out = new ovl_field{unsquare(square_at(*h->h, tau)), h->grid};
    });
}
void ovl_history_free(ovl_history* h) { delete h; }

ovl_status ovl_spectral_report(const ovl_field* v, double theta, double tau, ovl_spectral* out) {
    return guarded([&] {
        need(v, "field");
        need(out, "output");
        ovl_spectral o = to_c(project(v->f, theta, tau));
        o.width_ratio = width_ratio(truncate(v->f, theta));
        *out = o;
    });
}

ovl_status ovl_kappa_quadratic(const ovl_history* h, double tau0, double kappa, double theta, ovl_kappa* out) {
    return guarded([&] {
        need(h, "history");
        need(out, "output");
        KappaOptions ko;
        ko.theta = theta;
        const KappaVerdict kv = kappa_quadratic(*h->h, h->grid.g, tau0, kappa, ko);
        *out = ovl_kappa{kv.measured_kappa, kv.quadratic_ok, kv.centering_norm,
                         kv.centering_ok,   kv.graphical_max, kv.graphical_ok};
    });
}

ovl_status ovl_modes_integrate(const double alpha0[3], double tau0, double tau1, double h, ovl_trajectory** out) {
    return guarded([&] {
        need(alpha0, "initial data");
        need(out, "output");
        require(h > 0, ErrorKind::parameter, "step must be positive");
        require(tau0 < 0 && tau1 < 0, ErrorKind::parameter, "mode dynamics live at tau < 0");
        const Trajectory tr = integrate(ModeSystem::alpha, {alpha0[0], alpha0[1], alpha0[2]}, tau0, tau1, h);
        auto* t = new ovl_trajectory;
        t->blew_up = tr.blew_up;
        t->when = tr.blowup_time;
        for (size_t i = 0; i < tr.t.size(); ++i) {
            const ModeState m = derive(tr.t[i], Alpha{tr.y[i][0], tr.y[i][1], tr.y[i][2]});
            t->rows.push_back({m.tau, m.alpha[0], m.alpha[1], m.alpha[2], m.S, m.D, m.xi[0], m.xi[1]});
        }
        *out = t;
    });
}
size_t ovl_trajectory_size(const ovl_trajectory* t) { return t->rows.size(); }
void ovl_trajectory_row(const ovl_trajectory* t, size_t i, double row[8]) {
    std::memcpy(row, t->rows[i].data(), sizeof(double) * 8);
}
int ovl_trajectory_blew_up(const ovl_trajectory* t, double* when) {
    if (when) *when = t->when;
    return t->blew_up ? 1 : 0;
}
void ovl_trajectory_free(ovl_trajectory* t) { delete t; }

ovl_status ovl_diagnose(const ovl_field* v, double tau, double theta, double L, double delta, double eps,
                        ovl_diagnostics* out) {
    return guarded([&] {
        need(v, "field");
        need(out, "output");
        require(tau <= -1, ErrorKind::parameter, "diagnostics need tau <= -1");
        require(eps > 0, ErrorKind::parameter, "eps must be positive");
        fill_diagnostics(make_renormalized(v->f, tau, theta, L), delta, eps, out);
    });
}

ovl_status ovl_diagnose_history(const ovl_history* h, double tau, double theta, double L, double delta, double eps,
                                ovl_diagnostics* out) {
    return guarded([&] {
        need(h, "history");
        need(out, "output");
        require(tau <= -1, ErrorKind::parameter, "diagnostics need tau <= -1");
        require(eps > 0, ErrorKind::parameter, "eps must be positive");
        require(theta > 0 && theta < 1, ErrorKind::parameter, "theta must lie in (0, 1)");
        FlowState s;
        s.mode = FlowMode::renormalized;
        s.tau = tau;
        s.t = -std::exp(-tau);
        s.theta = theta;
        s.L = L;
        s.q = square_at(*h->h, tau);
        fill_exterior(s.q);
        sync_tip(s);
        fill_diagnostics(s, delta, eps, out);
    });
}

ovl_status ovl_recentre_solve(const ovl_history* h, double tau0, int mode, double kappa, double theta,
                              ovl_recentre* out) {
    return guarded([&] {
        need(h, "history");
        need(out, "output");
        require(mode == 2 || mode == 4, ErrorKind::parameter, "mode must be 2 or 4");
        SolveOptions so;
        so.mode = mode == 2 ? SolveMode::two_param : SolveMode::four_param;
        so.kappa = kappa;
        so.psi.theta = theta;
        const SolveResult r = solve_psi(*h->h, tau0, h->grid.g, so);
        ovl_recentre o{};
        o.alpha[0] = r.params.alpha[0];
        o.alpha[1] = r.params.alpha[1];
        o.beta = r.params.beta;
        o.gamma = r.params.gamma;
        o.phi = r.params.phi;
        o.b = r.b;
        o.Gamma = r.Gamma;
        o.residual = r.residual;
        o.jacobian_det = r.jacobian_det;
        o.iterations = r.iterations;
        *out = o;
    });
}

double ovl_theta_star(void) { return theta_star(); }

ovl_status ovl_config_new(ovl_config** out) {
    return guarded([&] {
        need(out, "output");
        *out = new ovl_config;
    });
}
ovl_status ovl_config_read(ovl_config* c, const char* path) {
    return guarded([&] {
        need(c, "config");
        need(path, "path");
        c->c = read_config(std::string(path), c->c);
    });
}
ovl_status ovl_config_set(ovl_config* c, const char* key, const char* value) {
    return guarded([&] {
        need(c, "config");
        need(key, "key");
        need(value, "value");
        ExperimentConfig next = c->c;
        set_config_value(next, key, value);
        next.validate();
        c->c = next;
    });
}
ovl_status ovl_config_get(const ovl_config* c, const char* key, char** value) {
    return guarded([&] {
        need(c, "config");
        need(key, "key");
        need(value, "output");
        *value = copy_string(get_config_value(c->c, key));
    });
}
ovl_status ovl_config_print(const ovl_config* c, char** text) {
    return guarded([&] {
        need(c, "config");
        need(text, "output");
        *text = copy_string(print_config(c->c));
    });
}
int ovl_config_workers(const ovl_config* c) { return worker_count(c->c); }
void ovl_config_free(ovl_config* c) { delete c; }

ovl_status ovl_normalize_ellipsoid(const ovl_config* c, double a, ovl_flow** out) {
    return guarded([&] {
        need(c, "config");
        need(out, "output");
        c->c.validate();
        NormalizedFlow f = normalize_ellipsoid(EllipsoidSpec{a, c->c.ell, c->c.R, c->c.T}, c->c);
        auto* res = new ovl_flow{std::move(f), {}};
        res->history = wrap_history(res->f.history);
        *out = res;
    });
}
void ovl_flow_get_info(const ovl_flow* f, ovl_flow_info* info) {
    *info = ovl_flow_info{f->f.spec.a,      f->f.spec.ell,    f->f.t_e, f->f.lambda, f->f.time_shift,
                          f->f.tau_crossing, f->f.extinction_iterations};
}
const ovl_history* ovl_flow_history(const ovl_flow* f) { return &f->history; }
void ovl_flow_free(ovl_flow* f) { delete f; }

ovl_status ovl_sweep(const ovl_config* c, ovl_table** out) {
    return guarded([&] {
        need(c, "config");
        need(out, "output");
        *out = new ovl_table{sweep(c->c)};
    });
}
ovl_status ovl_table_read_csv(const char* path, ovl_table** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "output");
        std::ifstream is(path);
        require(static_cast<bool>(is), ErrorKind::io, std::string("cannot open ") + path);
        *out = new ovl_table{read_sweep_csv(is)};
    });
}
ovl_status ovl_table_write_csv(const ovl_table* t, const char* path) {
    return guarded([&] {
        need(t, "table");
        need(path, "path");
        std::ofstream os(path);
        require(static_cast<bool>(os), ErrorKind::io, std::string("cannot write ") + path);
        write_sweep_csv(os, t->rows);
    });
}
size_t ovl_table_size(const ovl_table* t) { return t->rows.size(); }
void ovl_table_row(const ovl_table* t, size_t i, ovl_sweep_row* row) {
    const SweepRow& r = t->rows[i];
    *row = ovl_sweep_row{r.a,  r.ok,     r.error.c_str(), r.kappa_measured, r.R,     r.Q_eig1,
                         r.Q_eig2, r.collar_dev, r.concavity_margin, r.t_e, r.lambda, r.b,
                         r.Gamma, r.jacobian_det, r.kappa_quadratic, r.seconds};
}
void ovl_table_free(ovl_table* t) { delete t; }

} // extern "C"
