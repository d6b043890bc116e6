#include "ovalab/pipeline.hpp"

#include "ovalab/diagnostics.hpp"
#include "ovalab/errors.hpp"
#include "ovalab/spectral.hpp"
#include "numerics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

namespace ovalab {

double theta_star() { return 0.5 * (4.0 / std::numbers::e + std::sqrt(2.0 * std::numbers::pi / std::numbers::e)); }

void ExperimentConfig::validate() const {
    require(n_r >= 16 && n_phi >= 8 && n_phi % 4 == 0, ErrorKind::parameter,
            "grid needs n_r >= 16 and n_phi >= 8, a multiple of 4");
    require(y_max > 0.0, ErrorKind::parameter, "y_max must be positive");
    require(theta > 0.0 && theta < 1.0, ErrorKind::parameter, "theta must lie in (0, 1)");
    require(L >= 1.0, ErrorKind::parameter, "L must be at least 1");
    require(tau0 <= -1.0, ErrorKind::parameter, "tau0 must be at most -1");
    require(ell > 0.0 && R > 0.0, ErrorKind::parameter, "ellipsoid needs ell > 0 and R > 0");
    require(!sweep_a.empty(), ErrorKind::parameter, "sweep list is empty");
    for (double a : sweep_a) require(a > 0.0 && a < 1.0, ErrorKind::parameter, "sweep values must lie in (0, 1)");
    require(snapshot_every > 0.0, ErrorKind::parameter, "snapshot spacing must be positive");
    require(rel_tol > 0.0 && trunk_tol > 0.0 && history_tol > 0.0, ErrorKind::parameter,
            "tolerances must be positive");
    require(max_iter > 0, ErrorKind::parameter, "max_iter must be positive");
    require(target_density > 4.0 / std::numbers::e && target_density < std::sqrt(2 * std::numbers::pi / std::numbers::e),
            ErrorKind::parameter, "target density must lie between the two cylinder densities");
    require(kappa > 0.0 && delta >= 0.0, ErrorKind::parameter, "kappa must be positive and delta nonnegative");
    require(threads >= 0, ErrorKind::parameter, "threads must be nonnegative");
}

GridPtr ExperimentConfig::grid() const { return build_grid(n_r, n_phi, y_max); }

namespace {

struct Entry {
    const char* key;
    const char* doc;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

double to_double(const std::string& s) {
    size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &pos);
    } catch (const std::exception&) {
        fail(ErrorKind::parameter, "not a number: " + s);
    }
    require(pos == s.size(), ErrorKind::parameter, "not a number: " + s);
    return x;
}

int to_int(const std::string& s) {
    const double x = to_double(s);
    require(x == std::floor(x) && std::abs(x) < 1e9, ErrorKind::parameter, "not an integer: " + s);
    return static_cast<int>(x);
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    // Round-trip exactly, but keep short values short.
    std::ostringstream s2;
    s2 << std::setprecision(10) << x;
    return to_double(s2.str()) == x ? s2.str() : os.str();
}

std::vector<double> to_list(const std::string& s) {
    std::string t = s;
    for (char& c : t)
        if (c == ',' || c == '[' || c == ']') c = ' ';
    std::istringstream is(t);
    std::vector<double> out;
    std::string w;
    while (is >> w) out.push_back(to_double(w));
    return out;
}

#define OVALAB_NUM(sec, name, doc)                                                                              \
    Entry {                                                                                                     \
        sec "." #name, doc, [](ExperimentConfig& c, const std::string& v) { c.name = to_double(v); },          \
            [](const ExperimentConfig& c) { return fmt(c.name); }                                               \
    }
#define OVALAB_INT(sec, name, doc)                                                                              \
    Entry {                                                                                                     \
        sec "." #name, doc, [](ExperimentConfig& c, const std::string& v) { c.name = to_int(v); },             \
            [](const ExperimentConfig& c) { return std::to_string(c.name); }                                    \
    }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        OVALAB_INT("grid", n_r, "radial intervals"),
        OVALAB_INT("grid", n_phi, "angular nodes (multiple of 4)"),
        OVALAB_NUM("grid", y_max, "outer radius of the renormalized grid"),
        OVALAB_NUM("regions", theta, "collar ceiling"),
        OVALAB_NUM("regions", L, "soliton/collar split"),
        OVALAB_NUM("ellipsoid", ell, "length parameter of E(a, ell, R)"),
        OVALAB_NUM("ellipsoid", R, "S^1 radius at the center"),
        OVALAB_NUM("ellipsoid", T, "unrescaled start time"),
        OVALAB_NUM("flow", snapshot_every, "renormalized time between stored slices"),
        OVALAB_NUM("flow", rel_tol, "extinction time tolerance relative to t_e - T"),
        OVALAB_NUM("flow", trunk_tol, "frame distortion accepted when trials resume"),
        OVALAB_NUM("flow", history_tol, "frame distortion accepted in the returned history"),
        OVALAB_INT("flow", max_iter, "extinction trials"),
        OVALAB_NUM("normalize", target_density, "Huisken density at t = -1 after normalization"),
        Entry{"sweep.a", "ellipsoid parameters a in (0, 1)",
              [](ExperimentConfig& c, const std::string& v) { c.sweep_a = to_list(v); },
              [](const ExperimentConfig& c) {
                  std::string s = "[";
                  for (size_t k = 0; k < c.sweep_a.size(); ++k) s += (k ? ", " : "") + fmt(c.sweep_a[k]);
                  return s + "]";
              }},
        OVALAB_NUM("sweep", tau0, "renormalized time of the analysis"),
        OVALAB_NUM("sweep", kappa, "kappa of the quadratic test and of the search box"),
        OVALAB_NUM("sweep", delta, "concavity slack"),
        Entry{"output.out_dir", "output directory",
              [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
              [](const ExperimentConfig& c) { return "\"" + c.out_dir + "\""; }},
        OVALAB_INT("output", threads, "worker threads, 0 = OVALAB_THREADS or all cores"),
    };
    return table;
}

#undef OVALAB_NUM
#undef OVALAB_INT

std::string unquote(std::string s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    return s;
}

} // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& e : entries())
        if (key == e.key) {
            e.set(cfg, unquote(value));
            return;
        }
    fail(ErrorKind::parameter, "unknown configuration key: " + key);
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) {
    for (const auto& e : entries())
        if (key == e.key) return unquote(e.get(cfg));
    fail(ErrorKind::parameter, "unknown configuration key: " + key);
}

ExperimentConfig read_config(std::istream& in, ExperimentConfig cfg) {
    CLI::ConfigTOML parser;
    std::vector<CLI::ConfigItem> items;
    try {
        items = parser.from_config(in);
    } catch (const CLI::Error& e) {
        fail(ErrorKind::parameter, std::string("bad configuration: ") + e.what());
    }
    for (const auto& it : items) {
        if (it.name == "++" || it.name == "--") continue; // section markers
        std::string key;
        for (const auto& p : it.parents)
            if (p != "default") key += p + ".";
        key += it.name;
        std::string value;
        for (size_t k = 0; k < it.inputs.size(); ++k) value += (k ? "," : "") + it.inputs[k];
        set_config_value(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig read_config(const std::string& path, ExperimentConfig base) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorKind::io, "cannot read " + path);
    return read_config(is, std::move(base));
}

std::string print_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    std::string section;
    for (const auto& e : entries()) {
        const std::string key = e.key;
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
            section = sec;
        }
        os << "# " << e.doc << "\n" << key.substr(dot + 1) << " = " << e.get(cfg) << "\n";
    }
    return os.str();
}

int worker_count(const ExperimentConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    if (const char* s = std::getenv("OVALAB_THREADS")) {
        const int n = std::atoi(s);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

ScalarField square_at(const SnapshotHistory& h, double tau) {
    require(h.covers(tau, 1e-9), ErrorKind::coverage, "history does not cover the requested time");
    const auto& S = h.snapshots();
    auto it = std::upper_bound(S.begin(), S.end(), tau, [](double t, const Snapshot& s) { return t < s.tau; });
    size_t k = it == S.begin() ? 0 : static_cast<size_t>(it - S.begin()) - 1;
    if (k + 1 >= S.size()) return S.back().q;
    const double w = std::clamp((tau - S[k].tau) / (S[k + 1].tau - S[k].tau), 0.0, 1.0);
    ScalarField q(S[k].q.grid_ptr());
    for (size_t n = 0; n < q.values().size(); ++n)
        q.values()[n] = (1 - w) * S[k].q.values()[n] + w * S[k + 1].q.values()[n];
    return q;
}

NormalizedFlow normalize_ellipsoid(const EllipsoidSpec& spec, const ExperimentConfig& cfg) {
    validate(spec);
    cfg.validate();
    const GridPtr grid = cfg.grid();
    const double target = cfg.target_density;
    ExtinctionOptions opt;
    opt.rel_tol = cfg.rel_tol;
    opt.max_iter = cfg.max_iter;
    opt.trunk_tol = cfg.trunk_tol;
    opt.keep_history = true;
    opt.history_tol = cfg.history_tol;
    opt.run.snapshot_every = cfg.snapshot_every;
    // Stop a little past the crossing so that it is bracketed by stored slices.
    opt.horizon = [&](const ScalarField& q, double) { return huisken_renormalized(q) < target - 1e-3; };
    const auto ex = find_extinction([&](double x1, double x2) { return ellipsoid_q(spec, x1, x2); }, spec.T, grid, opt);

    NormalizedFlow out;
    out.spec = spec;
    out.t_e = ex.t_e;
    out.time_shift = ex.t_e;
    out.extinction_iterations = ex.iterations;
    out.history = ex.history;
    require(out.history && out.history->snapshots().size() >= 2, ErrorKind::normalization,
            "the extinction search kept no usable history");
    const auto& S = out.history->snapshots();
    std::vector<double> theta(S.size());
    for (size_t k = 0; k < S.size(); ++k) theta[k] = huisken_renormalized(S[k].q);
    require(theta.front() > target, ErrorKind::normalization,
            "the flow starts below the target density (initial body too round for the grid)");
    size_t k = 1;
    while (k < S.size() && theta[k] > target) ++k;
    require(k < S.size(), ErrorKind::normalization,
            "the stored flow never reaches the target density (extinction search ran out of precision)");
    const auto f = [&](double tau) { return huisken_renormalized(square_at(*out.history, tau)) - target; };
    out.tau_crossing = brent(f, S[k - 1].tau, S[k].tau, 1e-12);
    out.lambda = std::exp(0.5 * out.tau_crossing);
    out.history->retime(-out.tau_crossing);
    return out;
}

namespace {


} // namespace

ScalarField transformed_square(const SnapshotHistory& h, const TransformParams& p, double tau, const GridPtr& grid) {
    const double b = p.b(tau);
    const auto a = p.a(tau);
    const ScalarField q = square_at(h, p.source_tau(tau));
    const double c = std::cos(p.phi), s = std::sin(p.phi);
    ScalarField out = sample(grid, [&](double y, double ph) {
        const double y1 = y * std::cos(ph), y2 = y * std::sin(ph);
        const double r1 = c * y1 + s * y2 - a[0], r2 = -s * y1 + c * y2 - a[1];
        return (1 + b) * (1 + b) * interpolate(q, r1 / (1 + b), r2 / (1 + b));
    });
    fill_exterior(out);
    return out;
}

SweepRow analyze_flow(const NormalizedFlow& flow, const ExperimentConfig& cfg) {
    SweepRow row;
    row.a = flow.spec.a;
    row.t_e = flow.t_e;
    row.lambda = flow.lambda;
    const GridPtr grid = cfg.grid();
    const double tau0 = cfg.tau0;

    SolveOptions so;
    so.mode = SolveMode::two_param;
    so.kappa = cfg.kappa;
    so.psi.theta = cfg.theta;
    const SolveResult sol = solve_psi(*flow.history, tau0, grid, so);
    row.b = sol.b;
    row.Gamma = sol.Gamma;
    row.jacobian_det = sol.jacobian_det;
    const TransformedHistory th(flow.history, sol.params);

    KappaOptions ko;
    ko.theta = cfg.theta;
    const KappaVerdict kv = kappa_quadratic(th, grid, tau0, cfg.kappa, ko);
    row.kappa_measured = kv.measured_kappa;
    row.kappa_quadratic = kv.pass();

    const ScalarField q = transformed_square(*flow.history, sol.params, tau0, grid);
    ScalarField v(grid);
    for (size_t n = 0; n < q.values().size(); ++n) v.values()[n] = q.values()[n] > 0 ? std::sqrt(q.values()[n]) : 0.0;
    const SpectralReport rep = project(v, cfg.theta, tau0);
    row.Q_eig1 = rep.Q_eig[0];
    row.Q_eig2 = rep.Q_eig[1];
    row.R = width_ratio(truncate(v, cfg.theta));
    try {
        row.collar_dev = collar_deviation(q, tau0, cfg.theta, cfg.L).deviation;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::coverage) throw;
        row.collar_dev = std::numeric_limits<double>::quiet_NaN();
    }
    row.concavity_margin = concavity_margin_renormalized(q, tau0, cfg.delta).max_margin;
    row.ok = true;
    return row;
}

SweepRow sweep_row(double a, const ExperimentConfig& cfg, std::shared_ptr<NormalizedFlow>* keep) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepRow row;
    row.a = a;
    try {
        auto flow = std::make_shared<NormalizedFlow>(normalize_ellipsoid(EllipsoidSpec{a, cfg.ell, cfg.R, cfg.T}, cfg));
        row = analyze_flow(*flow, cfg);
        if (keep) *keep = flow;
    } catch (const Error& e) {
        row.ok = false;
        row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const size_t n = cfg.sweep_a.size();
    std::vector<SweepRow> rows(n);
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (size_t k; (k = next++) < n;) rows[k] = sweep_row(cfg.sweep_a[k], cfg);
    };
    const int nt = std::min<int>(worker_count(cfg), static_cast<int>(n));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return rows;
}

namespace {
const char* sweep_header = "a,kappa_measured,R,Q_eig1,Q_eig2,collar_dev,concavity_margin,status,t_e,lambda,b,Gamma,"
                           "jacobian_det,kappa_quadratic,error";
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << sweep_header << "\n";
    char buf[512];
    for (const auto& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%d,", r.a,
                      r.kappa_measured, r.R, r.Q_eig1, r.Q_eig2, r.collar_dev, r.concavity_margin, r.ok ? "ok" : "failed",
                      r.t_e, r.lambda, r.b, r.Gamma, r.jacobian_det, r.kappa_quadratic ? 1 : 0);
        os << buf << err << "\n";
    }
}

std::vector<SweepRow> read_sweep_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::io, "empty sweep table");
    require(line == sweep_header, ErrorKind::io, "unexpected sweep table header");
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        require(f.size() == 15, ErrorKind::io, "bad sweep row: " + line);
        SweepRow r;
        // strtod reads nan and inf as written by printf.
        auto num = [&](int k) { return std::strtod(f[k].c_str(), nullptr); };
        r.a = num(0);
        r.kappa_measured = num(1);
        r.R = num(2);
        r.Q_eig1 = num(3);
        r.Q_eig2 = num(4);
        r.collar_dev = num(5);
        r.concavity_margin = num(6);
        r.ok = f[7] == "ok";
        r.t_e = num(8);
        r.lambda = num(9);
        r.b = num(10);
        r.Gamma = num(11);
        r.jacobian_det = num(12);
        r.kappa_quadratic = f[13] == "1";
        r.error = f[14];
        rows.push_back(r);
    }
    return rows;
}

void write_history(const std::string& dir, const SnapshotHistory& h) {
    require(!h.empty(), ErrorKind::parameter, "cannot write an empty history");
    std::filesystem::create_directories(dir);
    const auto& S = h.snapshots();
    const auto& G = S.front().q.grid();
    nlohmann::json idx;
    idx["format"] = "ovalab-history-1";
    idx["n_phi"] = G.n_phi();
    idx["y_nodes"] = G.y_nodes();
    std::vector<double> taus;
    for (const auto& s : S) taus.push_back(s.tau);
    idx["tau"] = taus;
    idx["data"] = "q.f64";
    std::ofstream js(dir + "/history.json");
    require(static_cast<bool>(js), ErrorKind::io, "cannot write " + dir + "/history.json");
    js << idx.dump(1) << "\n";
    std::ofstream bin(dir + "/q.f64", std::ios::binary);
    require(static_cast<bool>(bin), ErrorKind::io, "cannot write " + dir + "/q.f64");
    for (const auto& s : S) {
        require(s.q.grid().same_as(G), ErrorKind::shape, "history slices live on different grids");
        bin.write(reinterpret_cast<const char*>(s.q.values().data()),
                  static_cast<std::streamsize>(s.q.values().size() * sizeof(double)));
    }
}

std::shared_ptr<SnapshotHistory> read_history(const std::string& dir) {
    std::ifstream js(dir + "/history.json");
    require(static_cast<bool>(js), ErrorKind::io, "no history.json in " + dir);
    nlohmann::json idx;
    try {
        js >> idx;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::io, std::string("bad history index: ") + e.what());
    }
    require(idx.value("format", "") == "ovalab-history-1", ErrorKind::io, "unknown history format");
    auto y = idx.at("y_nodes").get<std::vector<double>>();
    const int n_phi = idx.at("n_phi").get<int>();
    const auto taus = idx.at("tau").get<std::vector<double>>();
    auto grid = std::make_shared<const PolarGrid>(std::move(y), n_phi);
    std::ifstream bin(dir + "/" + idx.value("data", "q.f64"), std::ios::binary);
    require(static_cast<bool>(bin), ErrorKind::io, "missing history data in " + dir);
    auto h = std::make_shared<SnapshotHistory>();
    const size_t n = static_cast<size_t>(grid->size());
    for (double tau : taus) {
        std::vector<double> vals(n);
        bin.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(n * sizeof(double)));
        require(static_cast<size_t>(bin.gcount()) == n * sizeof(double), ErrorKind::io, "history data is truncated");
        h->push_square(tau, ScalarField(grid, std::move(vals)));
    }
    return h;
}

} // namespace ovalab
