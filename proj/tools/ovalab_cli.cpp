// ovalab command line front end. Every subcommand writes its results below
// --out together with a manifest.json describing the run.

#include "ovalab/ovalab.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
    ovl_status status;
    std::string message;
};

void check(ovl_status s) {
    if (s != OVL_OK) throw Failure{s, ovl_last_error()};
}

void usage(const std::string& msg) { throw Failure{OVL_ERR_PARAMETER, msg}; }

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    Handle(Handle&& o) noexcept : p(o.p) { o.p = nullptr; }
    ~Handle() {
        if (p) Free(p);
    }
    T** out() { return &p; }
    T* get() const { return p; }
};

using Grid = Handle<ovl_grid, ovl_grid_free>;
using Field = Handle<ovl_field, ovl_field_free>;
using History = Handle<ovl_history, ovl_history_free>;
using Config = Handle<ovl_config, ovl_config_free>;

// Shared options, filled by CLI11 before the subcommand callback runs.
struct Session {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    Config cfg;
    json manifest;
    std::vector<std::string> outputs;

    std::string config_value(const std::string& key) const {
        char* value = nullptr;
        check(ovl_config_get(cfg.get(), key.c_str(), &value));
        std::string v(value);
        ovl_string_free(value);
        return v;
    }
    double num(const std::string& key) const { return std::stod(config_value(key)); }
    int integer(const std::string& key) const { return std::stoi(config_value(key)); }

    void prepare() {
        check(ovl_config_new(cfg.out()));
        if (!config_path.empty()) check(ovl_config_read(cfg.get(), config_path.c_str()));
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) usage("--set expects key=value, got " + s);
            check(ovl_config_set(cfg.get(), s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()));
        }
        if (out_dir.empty()) out_dir = config_value("output.out_dir");
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) usage("cannot create " + out_dir + ": " + ec.message());
    }

    std::string path(const std::string& name) {
        outputs.push_back(name);
        return (fs::path(out_dir) / name).string();
    }

    Grid grid() const {
        Grid g;
        check(ovl_grid_new(integer("grid.n_r"), integer("grid.n_phi"), num("grid.y_max"), g.out()));
        return g;
    }

    void finish(const std::string& command, json results) {
        char* text = nullptr;
        check(ovl_config_print(cfg.get(), &text));
        manifest["tool"] = "ovalab";
        manifest["version"] = ovl_version();
        manifest["command"] = command;
        manifest["config"] = std::string(text);
        ovl_string_free(text);
        manifest["outputs"] = outputs;
        manifest["results"] = std::move(results);
        write_json(path("manifest.json"), manifest);
    }

    static void write_json(const std::string& p, const json& j) {
        std::ofstream os(p);
        if (!os) throw Failure{OVL_ERR_PARAMETER, "cannot write " + p};
        os << j.dump(2) << "\n";
    }
};

json grid_json(const ovl_grid* g) {
    int n_r = 0, n_phi = 0;
    double y_max = 0;
    ovl_grid_shape(g, &n_r, &n_phi, &y_max);
    return {{"n_r", n_r}, {"n_phi", n_phi}, {"y_max", y_max}};
}

json spectral_json(const ovl_spectral& s) {
    return {{"tau", s.tau},
            {"coefficients", std::vector<double>(s.coeff, s.coeff + 6)},
            {"alpha", std::vector<double>(s.alpha, s.alpha + 3)},
            {"S", s.S},
            {"D", s.D},
            {"xi", {s.xi[0], s.xi[1]}},
            {"Q", {{s.Q[0][0], s.Q[0][1]}, {s.Q[1][0], s.Q[1][1]}}},
            {"Q_eigenvalues", {s.Q_eig[0], s.Q_eig[1]}},
            {"stable_residual", s.stable_residual},
            {"width_ratio", s.width_ratio}};
}

json diagnostics_json(const ovl_diagnostics& d, double theta, double L) {
    return {{"tau", d.tau},
            {"regions",
             {{"theta", theta},
              {"L", L},
              {"soliton_below_v", d.v_soliton},
              {"collar_v", {d.v_soliton, d.v_collar}},
              {"cylindrical_above_v", d.v_soliton}}},
            {"concavity", {{"max_margin", d.concavity_margin}, {"y", d.concavity_y}, {"phi", d.concavity_phi}}},
            {"collar", {{"deviation", d.collar_deviation}, {"nodes", d.collar_nodes}}},
            {"cylindrical_estimate", d.cylindrical},
            {"huisken_density", d.huisken},
            {"asymptotics", {{"parabolic", d.parabolic}, {"intermediate", d.intermediate}, {"tip", d.tip}}}};
}

// A profile given either as a field CSV or as a history slice.
struct Source {
    std::string field_csv, history_dir;
    std::optional<double> tau;

    void add(CLI::App* sub) {
        sub->add_option("--field", field_csv, "profile v as a field CSV");
        sub->add_option("--history", history_dir, "history directory");
        sub->add_option("--tau", tau, "renormalized time of the slice");
    }
    void validate() const {
        if (field_csv.empty() == history_dir.empty()) usage("give exactly one of --field and --history");
        if (!tau) usage("--tau is required");
    }
};

int run_cli(int argc, char** argv) {
    CLI::App app{"ovalab: numerical lab for bubble-sheet ovals"};
    app.require_subcommand(0, 1);
    Session ses;
    bool print_config = false;
    app.add_option("--config", ses.config_path, "configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", ses.sets, "override one entry, section.key=value");
    app.add_option("--out", ses.out_dir, "output directory (default: output.out_dir)");
    app.add_flag("--print-config", print_config, "print the configuration with all defaults and exit");

    // bowl
    double rho_max = 100.0, drho = 1e-3;
    auto* bowl = app.add_subcommand("bowl", "tabulate the translating bowl");
    bowl->add_option("--rho-max", rho_max)->check(CLI::PositiveNumber);
    bowl->add_option("--drho", drho)->check(CLI::PositiveNumber);

    // shrinker-residual
    std::vector<std::string> models{"bubble-sheet", "sphere", "neck"};
    double v_min = 0.3, r_ymax = 4.0, c_width = 0.1, c_strength = 20.0;
    double c_center = std::sqrt(6.0);
    auto* resid = app.add_subcommand("shrinker-residual", "residual of the exact shrinkers under refinement");
    resid->add_option("--model", models)->check(CLI::IsMember({"bubble-sheet", "sphere", "neck"}));
    resid->add_option("--v-min", v_min, "only nodes with v >= v_min count");
    resid->add_option("--y-max", r_ymax, "outer radius of the residual grids");
    resid->add_option("--cluster-center", c_center, "radius where radial nodes concentrate");
    resid->add_option("--cluster-width", c_width);
    resid->add_option("--cluster-strength", c_strength, "peak node density, 1 = uniform");

    // simulate
    std::string init = "oval";
    double tau_start = -50.0, tau_end = -49.0;
    auto* sim = app.add_subcommand("simulate", "run the renormalized flow");
    sim->add_option("--init", init, "bubble-sheet, sphere, neck, normal-form, oval or a field CSV path");
    sim->add_option("--tau-start", tau_start);
    sim->add_option("--tau-end", tau_end);

    // spectral-report
    Source spec_src;
    double kappa_tau0 = NAN;
    auto* spec = app.add_subcommand("spectral-report", "projection on the unstable and neutral modes");
    spec_src.add(spec);
    spec->add_option("--tau0", kappa_tau0, "also test kappa-quadraticity at tau0 (needs --history)");

    // modes
    std::vector<double> alpha0;
    double m_tau0 = -10.0, m_tau1 = -100.0, m_h = 0.01;
    auto* modes = app.add_subcommand("modes", "integrate the neutral-mode ODE");
    modes->add_option("--alpha", alpha0, "alpha_1,alpha_2,alpha_3 at tau0 (default: the attractor)")
        ->expected(3)
        ->delimiter(',');
    modes->add_option("--tau0", m_tau0);
    modes->add_option("--tau1", m_tau1);
    modes->add_option("--step", m_h)->check(CLI::PositiveNumber);

    // diagnose
    Source diag_src;
    double eps = 0.1;
    auto* diag = app.add_subcommand("diagnose", "region diagnostics of one slice");
    diag_src.add(diag);
    diag->add_option("--eps", eps)->check(CLI::PositiveNumber);

    // recentre
    std::string rc_history;
    std::optional<double> rc_tau0;
    int rc_mode = 2;
    auto* rec = app.add_subcommand("recentre", "solve for the normalizing change of frame");
    rec->add_option("--history", rc_history)->required();
    rec->add_option("--tau0", rc_tau0);
    rec->add_option("--mode", rc_mode)->check(CLI::IsMember({2, 4}));

    // normalize-ellipsoid
    double a = 0.5;
    auto* norm = app.add_subcommand("normalize-ellipsoid", "run one ellipsoid to extinction and normalize it");
    norm->add_option("--a", a);

    // sweep
    auto* sw = app.add_subcommand("sweep", "normalize, recentre and tabulate every sweep value");

    // report
    std::string rp_history;
    auto* rep = app.add_subcommand("report", "consolidated report of every slice of a history");
    rep->add_option("--history", rp_history)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : OVL_ERR_PARAMETER;
    }

    if (print_config) {
        Config c;
        check(ovl_config_new(c.out()));
        if (!ses.config_path.empty()) check(ovl_config_read(c.get(), ses.config_path.c_str()));
        for (const auto& s : ses.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) usage("--set expects key=value, got " + s);
            check(ovl_config_set(c.get(), s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()));
        }
        char* text = nullptr;
        check(ovl_config_print(c.get(), &text));
        std::cout << text;
        ovl_string_free(text);
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return OVL_ERR_PARAMETER;
    }
    ses.prepare();
    const double theta = ses.num("regions.theta"), L = ses.num("regions.L");

    if (bowl->parsed()) {
        Handle<ovl_bowl, ovl_bowl_free> b;
        check(ovl_bowl_solve(rho_max, drho, b.out()));
        std::ofstream os(ses.path("bowl.csv"));
        os << "rho,Z,dZ\n";
        char buf[128];
        for (size_t i = 0; i < ovl_bowl_size(b.get()); ++i) {
            double r, z, dz;
            ovl_bowl_row(b.get(), i, &r, &z, &dz);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r, z, dz);
            os << buf;
        }
        ses.finish("bowl", {{"rho_max", rho_max}, {"drho", drho}, {"nodes", ovl_bowl_size(b.get())}});
    } else if (resid->parsed()) {
        const int n_r = ses.integer("grid.n_r"), n_phi = ses.integer("grid.n_phi");
        json res = json::object();
        for (const auto& m : models) {
            const ovl_model model = m == "bubble-sheet" ? OVL_MODEL_BUBBLE_SHEET
                                    : m == "sphere"     ? OVL_MODEL_SPHERE
                                                        : OVL_MODEL_NECK;
            double r[2];
            for (int k = 0; k < 2; ++k) {
                Grid g;
                if (c_strength > 1)
                    check(ovl_grid_new_clustered(n_r << k, n_phi << k, r_ymax, c_center, c_width, c_strength, g.out()));
                else
                    check(ovl_grid_new(n_r << k, n_phi << k, r_ymax, g.out()));
                Field f;
                check(ovl_field_model(g.get(), model, -1.0, f.out()));
                check(ovl_shrinker_residual(f.get(), v_min, &r[k]));
            }
            res[m] = {{"residual", r[0]}, {"residual_refined", r[1]}, {"ratio", r[1] > 0 ? r[0] / r[1] : INFINITY}};
        }
        res["v_min"] = v_min;
        res["grid"] = {{"n_r", n_r},
                       {"n_phi", n_phi},
                       {"y_max", r_ymax},
                       {"cluster", {{"center", c_center}, {"width", c_width}, {"strength", c_strength}}}};
        ses.finish("shrinker-residual", res);
    } else if (sim->parsed()) {
        Grid g = ses.grid();
        Field v;
        if (init == "bubble-sheet" || init == "sphere" || init == "neck" || init == "normal-form" || init == "oval") {
            const ovl_model model = init == "bubble-sheet" ? OVL_MODEL_BUBBLE_SHEET
                                    : init == "sphere"     ? OVL_MODEL_SPHERE
                                    : init == "neck"       ? OVL_MODEL_NECK
                                    : init == "oval"       ? OVL_MODEL_OVAL
                                                           : OVL_MODEL_NORMAL_FORM;
            check(ovl_field_model(g.get(), model, tau_start, v.out()));
        } else {
            check(ovl_field_read_csv(init.c_str(), v.out()));
        }
        ovl_run_options opt;
        ovl_run_options_default(&opt);
        opt.theta = theta;
        opt.L = L;
        opt.snapshot_every = ses.num("flow.snapshot_every");
        Handle<ovl_run, ovl_run_free> r;
        check(ovl_simulate(v.get(), tau_start, tau_end, &opt, r.out()));
        check(ovl_history_write(ovl_run_history(r.get()), ses.path("history").c_str()));
        check(ovl_field_write_csv(ovl_run_final(r.get()), ses.path("final.csv").c_str()));
        check(ovl_run_write_tip_csv(r.get(), ses.path("tip.csv").c_str()));
        static const char* status[] = {"completed", "collapsed", "escaped"};
        ses.finish("simulate", {{"tau_start", tau_start},
                                {"tau_end", ovl_run_tau(r.get())},
                                {"tau_end_requested", tau_end},
                                {"dt_policy", {{"scheme", "parabolic restriction, implicit angular terms near the pole"},
                                               {"c_cfl", opt.c_cfl}}},
                                {"theta", theta},
                                {"L", L},
                                {"grid", grid_json(ovl_field_grid(v.get()))},
                                {"status", status[ovl_run_status(r.get())]},
                                {"steps", ovl_run_steps(r.get())},
                                {"snapshots", ovl_history_count(ovl_run_history(r.get()))}});
    } else if (spec->parsed() || diag->parsed()) {
        Source& src = spec->parsed() ? spec_src : diag_src;
        src.validate();
        Field v;
        History h;
        if (!src.field_csv.empty()) {
            check(ovl_field_read_csv(src.field_csv.c_str(), v.out()));
        } else {
            check(ovl_history_read(src.history_dir.c_str(), h.out()));
            check(ovl_history_field(h.get(), *src.tau, v.out()));
        }
        if (spec->parsed()) {
            ovl_spectral s;
            check(ovl_spectral_report(v.get(), theta, *src.tau, &s));
            json out = spectral_json(s);
            if (!std::isnan(kappa_tau0)) {
                if (!h.get()) usage("--tau0 needs --history");
                ovl_kappa k;
                const double kappa = ses.num("sweep.kappa");
                check(ovl_kappa_quadratic(h.get(), kappa_tau0, kappa, theta, &k));
                out["kappa"] = {{"tau0", kappa_tau0},
                                {"kappa", kappa},
                                {"measured_kappa", k.measured_kappa},
                                {"quadratic", k.quadratic_ok != 0},
                                {"centering_norm", k.centering_norm},
                                {"centered", k.centering_ok != 0},
                                {"graphical_max", k.graphical_max},
                                {"graphical", k.graphical_ok != 0}};
            }
            Session::write_json(ses.path("spectral.json"), out);
            ses.finish("spectral-report", out);
        } else {
            ovl_diagnostics d;
            const double delta = ses.num("sweep.delta");
            if (h.get())
                check(ovl_diagnose_history(h.get(), *src.tau, theta, L, delta, eps, &d));
            else
                check(ovl_diagnose(v.get(), *src.tau, theta, L, delta, eps, &d));
            json out = diagnostics_json(d, theta, L);
            Session::write_json(ses.path("diagnose.json"), out);
            ses.finish("diagnose", out);
        }
    } else if (modes->parsed()) {
        if (alpha0.empty()) {
            const double c = 1.0 / (std::sqrt(8.0) * m_tau0);
            alpha0 = {c, c, 0.0};
        }
        Handle<ovl_trajectory, ovl_trajectory_free> t;
        check(ovl_modes_integrate(alpha0.data(), m_tau0, m_tau1, m_h, t.out()));
        std::ofstream os(ses.path("modes.csv"));
        os << "tau,a1,a2,a3,S,D,xi1,xi2\n";
        char buf[512];
        for (size_t i = 0; i < ovl_trajectory_size(t.get()); ++i) {
            double r[8];
            ovl_trajectory_row(t.get(), i, r);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r[0], r[1], r[2], r[3],
                          r[4], r[5], r[6], r[7]);
            os << buf;
        }
        double when = 0;
        const bool blew = ovl_trajectory_blew_up(t.get(), &when);
        ses.finish("modes", {{"alpha0", alpha0},
                             {"tau0", m_tau0},
                             {"tau1", m_tau1},
                             {"step", m_h},
                             {"rows", ovl_trajectory_size(t.get())},
                             {"blew_up", blew},
                             {"blowup_tau", blew ? json(when) : json(nullptr)}});
    } else if (rec->parsed()) {
        History h;
        check(ovl_history_read(rc_history.c_str(), h.out()));
        const double tau0 = rc_tau0 ? *rc_tau0 : ses.num("sweep.tau0");
        ovl_recentre r;
        check(ovl_recentre_solve(h.get(), tau0, rc_mode, ses.num("sweep.kappa"), theta, &r));
        json out = {{"alpha", {r.alpha[0], r.alpha[1]}},
                    {"beta", r.beta},
                    {"gamma", r.gamma},
                    {"phi", r.phi},
                    {"b", r.b},
                    {"Gamma", r.Gamma},
                    {"residual", r.residual},
                    {"jacobian_det", r.jacobian_det},
                    {"tau0", tau0},
                    {"mode", rc_mode},
                    {"iterations", r.iterations}};
        Session::write_json(ses.path("recentre.json"), out);
        ses.finish("recentre", out);
    } else if (norm->parsed()) {
        Handle<ovl_flow, ovl_flow_free> f;
        check(ovl_normalize_ellipsoid(ses.cfg.get(), a, f.out()));
        ovl_flow_info info;
        ovl_flow_get_info(f.get(), &info);
        check(ovl_history_write(ovl_flow_history(f.get()), ses.path("history").c_str()));
        double lo, hi;
        ovl_history_range(ovl_flow_history(f.get()), &lo, &hi);
        json out = {{"a", info.a},
                    {"ell", info.ell},
                    {"t_e", info.t_e},
                    {"lambda", info.lambda},
                    {"time_shift", info.time_shift},
                    {"tau_crossing", info.tau_crossing},
                    {"extinction_iterations", info.extinction_iterations},
                    {"target_density", ses.num("normalize.target_density")},
                    {"history_tau", {lo, hi}}};
        Session::write_json(ses.path("normalize.json"), out);
        ses.finish("normalize-ellipsoid", out);
    } else if (sw->parsed()) {
        Handle<ovl_table, ovl_table_free> t;
        check(ovl_sweep(ses.cfg.get(), t.out()));
        check(ovl_table_write_csv(t.get(), ses.path("sweep.csv").c_str()));
        json rows = json::array();
        int failed = 0;
        for (size_t i = 0; i < ovl_table_size(t.get()); ++i) {
            ovl_sweep_row r;
            ovl_table_row(t.get(), i, &r);
            failed += !r.ok;
            rows.push_back({{"a", r.a}, {"ok", r.ok != 0}, {"R", r.R}, {"error", r.error}});
        }
        ses.finish("sweep", {{"rows", rows}, {"failed", failed}, {"workers", ovl_config_workers(ses.cfg.get())}});
    } else if (rep->parsed()) {
        if (!fs::is_directory(rp_history) || fs::is_empty(rp_history)) usage("no history in " + rp_history);
        History h;
        check(ovl_history_read(rp_history.c_str(), h.out()));
        const double delta = ses.num("sweep.delta");
        json slices = json::array();
        std::ofstream csv(ses.path("report.csv"));
        csv << "tau,a1,a2,a3,S,D,xi1,xi2,Q_eig1,Q_eig2,width_ratio,huisken,concavity_margin,collar_deviation\n";
        char buf[512];
        for (size_t k = 0; k < ovl_history_count(h.get()); ++k) {
            const double tau = ovl_history_tau(h.get(), k);
            Field v;
            check(ovl_history_field(h.get(), tau, v.out()));
            ovl_spectral s;
            check(ovl_spectral_report(v.get(), theta, tau, &s));
            json slice = {{"spectral", spectral_json(s)}};
            if (tau <= -1) {
                ovl_diagnostics d;
                check(ovl_diagnose_history(h.get(), tau, theta, L, delta, eps, &d));
                slice["diagnostics"] = diagnostics_json(d, theta, L);
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                              tau, s.alpha[0], s.alpha[1], s.alpha[2], s.S, s.D, s.xi[0], s.xi[1], s.Q_eig[0],
                              s.Q_eig[1], s.width_ratio, d.huisken, d.concavity_margin, d.collar_deviation);
                csv << buf;
            }
            slices.push_back(std::move(slice));
        }
        csv.close();
        const json bundle = {{"schema", "ovalab-report-1"}, {"theta", theta}, {"L", L}, {"slices", slices}};
        const std::string bundle_path = ses.path("report.json");
        Session::write_json(bundle_path, bundle);
        std::ifstream back(bundle_path);
        const std::string text((std::istreambuf_iterator<char>(back)), std::istreambuf_iterator<char>());
        if (json::parse(text).dump(2) + "\n" != text) throw Failure{OVL_ERR_NUMERICAL, "report bundle does not read back"};
        ses.finish("report", {{"slices", slices.size()}, {"history", rp_history}});
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const Failure& f) {
        std::cerr << "ovalab: " << f.message << "\n";
        return f.status;
    } catch (const std::exception& e) {
        std::cerr << "ovalab: " << e.what() << "\n";
        return OVL_ERR_NUMERICAL;
    }
}
