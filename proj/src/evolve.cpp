#include "ovalab/evolve.hpp"

#include "ovalab/errors.hpp"
#include "numerics.hpp"
#include "stencils.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

namespace ovalab {

namespace {

// Invariant pieces of the quasilinear operator at one node.
struct Geo {
    double P;   // |Df|^2
    double lap; // Laplacian
    double QQ;  // f_i f_j f_ij
    double a;   // coefficient data for the angular term, see below
    double fy;  // radial derivative
    double fp2; // (f_phi / y)^2
};

Geo geo_polar(const PolarDerivs& d, double y) {
    const double gp = d.fp / y;
    const double hrr = d.fyy;
    const double hrp = d.fyp / y - d.fp / (y * y);
    const double hpp = d.fpp / (y * y) + d.fy / y;
    Geo g{};
    g.P = d.fy * d.fy + gp * gp;
    g.lap = d.fyy + d.fy / y + d.fpp / (y * y);
    g.QQ = d.fy * d.fy * hrr + 2 * d.fy * gp * hrp + gp * gp * hpp;
    g.fy = d.fy;
    g.fp2 = gp * gp;
    return g;
}

Geo geo_cart(const CartDerivs& c) {
    Geo g{};
    g.P = c.g1 * c.g1 + c.g2 * c.g2;
    g.lap = c.h11 + c.h22;
    g.QQ = c.g1 * c.g1 * c.h11 + 2 * c.g1 * c.g2 * c.h12 + c.g2 * c.g2 * c.h22;
    g.fy = 0.0;
    g.fp2 = 0.0;
    return g;
}

double v_operator(const Geo& g, double v, double y, bool renorm) {
    double r = g.lap - g.QQ / (1 + g.P) - 1.0 / v;
    if (renorm) r += -0.5 * y * g.fy + 0.5 * v;
    return r;
}

double q_operator(const Geo& g, double q, double y, bool renorm) {
    const double den = 4 * q + g.P;
    double r = g.lap - g.QQ / den - 2 * g.P / den - 2.0;
    if (renorm) r += -0.5 * y * g.fy + q;
    return r;
}

ScalarField rhs_v_impl(const ScalarField& v, bool renorm) {
    const auto& G = v.grid();
    for (double x : v.values())
        require(std::isfinite(x) && x >= 0.0, ErrorKind::domain, "profile must be nonnegative and finite");
    ScalarField out(v.grid_ptr());
    const double* data = v.values().data();
    if (data[0] > v_floor) {
        const double r = v_operator(geo_cart(pole_derivs(G, data)), data[0], 0.0, renorm);
        for (int j = 0; j < G.n_phi(); ++j) out(0, j) = r;
    }
    for (int i = 1; i <= G.n_r(); ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            const double x = v(i, j);
            if (x <= v_floor) continue;
            out(i, j) = v_operator(geo_polar(polar_derivs(G, data, i, j), G.y(i)), x, G.y(i), renorm);
        }
    return out;
}

// RHS of the q-equation at interior nodes. If acoef is given, it receives the
// coefficient multiplying q_phiphi / y^2 at every node of rings 1..n_imp.
ScalarField rhs_q_impl(const ScalarField& q, bool renorm, std::vector<double>* acoef = nullptr, int n_imp = 0) {
    const auto& G = q.grid();
    ScalarField out(q.grid_ptr());
    const double* data = q.values().data();
    if (data[0] > 0.0) {
        const double r = q_operator(geo_cart(pole_derivs(G, data)), data[0], 0.0, renorm);
        for (int j = 0; j < G.n_phi(); ++j) out(0, j) = r;
    }
    if (acoef) acoef->assign(static_cast<size_t>(n_imp + 1) * G.n_phi(), 0.0);
    for (int i = 1; i <= G.n_r(); ++i)
        for (int j = 0; j < G.n_phi(); ++j) {
            const double x = q(i, j);
            if (x <= 0.0) continue;
            const Geo g = geo_polar(polar_derivs(G, data, i, j), G.y(i));
            out(i, j) = q_operator(g, x, G.y(i), renorm);
            if (acoef && i <= n_imp) {
                const double base = 4 * x + g.fy * g.fy;
                (*acoef)[G.index(i, j)] = base / (base + g.fp2);
            }
        }
    return out;
}

// Number of rings (from 1) whose angular spacing is below 1.5 radial spacings.
int implicit_rings(const PolarGrid& G) {
    int m = 0;
    for (int i = 1; i < G.n_r(); ++i) {
        const double dy = std::min(G.y(i + 1) - G.y(i), G.y(i) - G.y(i - 1));
        if (G.y(i) * G.dphi() < 1.5 * dy)
            m = i;
        else
            break;
    }
    return m;
}

double outermost_interior(const ScalarField& q) {
    const auto& G = q.grid();
    int last = 0;
    for (int j = 0; j < G.n_phi(); ++j)
        for (int i = G.n_r(); i >= 0; --i)
            if (q(i, j) > 0.0) {
                last = std::max(last, i);
                break;
            }
    return last;
}

} // namespace

TipField::TipField(int nv, int nphi, double top) : n_v(nv), n_phi(nphi), v_top(top) {
    require(nv >= 4 && nphi >= 4 && top > 0.0, ErrorKind::parameter, "tip patch needs at least 4 nodes and v_top > 0");
    Y.assign(static_cast<size_t>(nv + 1) * nphi, 0.0);
}

double TipField::phi(int j) const { return 2 * std::numbers::pi * j / n_phi; }

ScalarField rhs_renormalized_v(const ScalarField& v) { return rhs_v_impl(v, true); }
ScalarField rhs_unrescaled_V(const ScalarField& V) { return rhs_v_impl(V, false); }
ScalarField rhs_renormalized_q(const ScalarField& q) { return rhs_q_impl(q, true); }
ScalarField rhs_unrescaled_q(const ScalarField& q) { return rhs_q_impl(q, false); }

double rhs_cartesian_v(const std::function<double(double, double)>& f, double y1, double y2, double h) {
    const double f0 = f(y1, y2);
    require(f0 > 0.0, ErrorKind::domain, "profile must be positive at the evaluation point");
    const double fe = f(y1 + h, y2), fw = f(y1 - h, y2), fn = f(y1, y2 + h), fs = f(y1, y2 - h);
    const double v1 = (fe - fw) / (2 * h), v2 = (fn - fs) / (2 * h);
    const double v11 = (fe - 2 * f0 + fw) / (h * h), v22 = (fn - 2 * f0 + fs) / (h * h);
    const double v12 = (f(y1 + h, y2 + h) - f(y1 + h, y2 - h) - f(y1 - h, y2 + h) + f(y1 - h, y2 - h)) / (4 * h * h);
    const double P = v1 * v1 + v2 * v2;
    const double QQ = v1 * v1 * v11 + 2 * v1 * v2 * v12 + v2 * v2 * v22;
    return v11 + v22 - QQ / (1 + P) - 0.5 * (y1 * v1 + y2 * v2) + 0.5 * f0 - 1.0 / f0;
}

TipField rhs_renormalized_Y(const TipField& Y, double /*tau*/) {
    require(!Y.empty(), ErrorKind::parameter, "empty tip patch");
    for (double x : Y.Y) require(std::isfinite(x) && x > 0.0, ErrorKind::domain, "inverse profile must be positive");
    const int nv = Y.n_v, n = Y.n_phi;
    const double dv = Y.dv(), h = 2 * std::numbers::pi / n;
    TipField out(nv, n, Y.v_top);
    // Reflected value: Y(-v) = Y(v).
    auto val = [&](int k, int j) { return Y.at(std::abs(k), j); };
    auto ang = [&](int k, int j, double& d1, double& d2) {
        const double fm2 = val(k, j - 2), fm1 = val(k, j - 1), f0 = val(k, j), fp1 = val(k, j + 1), fp2 = val(k, j + 2);
        d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h);
        d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h);
    };
    for (int k = 0; k <= nv; ++k) {
        const int first = std::min(k - 2, nv - 4);
        double xs[5];
        for (int m = 0; m < 5; ++m) xs[m] = (first + m) * dv;
        const auto w = fd_weights(k * dv, xs, 2);
        for (int j = 0; j < n; ++j) {
            double Yv = 0, Yvv = 0, Yvp = 0, Yp, Ypp;
            for (int m = 0; m < 5; ++m) {
                const int kk = first + m;
                Yv += w[m][1] * val(kk, j);
                Yvv += w[m][2] * val(kk, j);
                double a1, a2;
                ang(kk, j, a1, a2);
                Yvp += w[m][1] * a1;
            }
            ang(k, j, Yp, Ypp);
            const double y = val(k, j);
            const double D = y * y * (1 + Yv * Yv) + Yp * Yp;
            double r = ((y * y + Yp * Yp) * Yvv - 2 * Yp * Yv * Yvp + (1 + Yv * Yv) * Ypp) / D;
            const double v = k * dv;
            r += (k == 0 ? Yvv : Yv / v) - 0.5 * v * Yv;
            r += -Yp * Yp / (y * D) + 0.5 * y - 1.0 / y;
            out.at(k, j) = r;
        }
    }
    return out;
}

void fill_exterior(ScalarField& q) {
    const auto& G = q.grid();
    if (q(0, 0) <= 0.0) return;
    for (int j = 0; j < G.n_phi(); ++j) {
        int r = -1;
        for (int i = 1; i <= G.n_r(); ++i)
            if (q(i, j) <= 0.0) {
                r = i;
                break;
            }
        if (r < 0) continue;
        // Nodes within a fraction of a cell of the free boundary are slaved to
        // the continuation from deeper nodes: their own update is degenerate.
        while (r >= 4 && q(r - 1, j) < 0.3 * (q(r - 2, j) - q(r - 1, j))) --r;
        const int L = r - 1;
        const double yL = G.y(L), qL = q(L, j);
        double s, c = 0.0;
        if (L >= 2) {
            const double x0 = G.y(L - 2), x1 = G.y(L - 1), x2 = yL;
            const double q0 = q(L - 2, j), q1 = q(L - 1, j);
            const double d1 = (q1 - q0) / (x1 - x0), d2 = (qL - q1) / (x2 - x1);
            c = (d2 - d1) / (x2 - x0);
            s = d2 + c * (x2 - x1);
        } else {
            const double qp = L == 1 ? q(0, j) : qL;
            s = L == 1 ? (qL - qp) / (yL - G.y(0)) : 0.0;
        }
        const double span = 2 * (G.y(std::min(r, G.n_r())) - yL);
        if (c > 0.0) c = 0.0;
        if (!(s < 0.0)) s = -std::max(qL, 1e-12) / (G.y(std::min(r, G.n_r())) - yL);
        const double s_far = s + 2 * c * span, q_far = qL + s * span + c * span * span;
        for (int i = r; i <= G.n_r(); ++i) {
            const double d = G.y(i) - yL;
            q(i, j) = d <= span ? qL + s * d + c * d * d : q_far + s_far * (d - span);
        }
    }
}

double invert_ray(const ScalarField& q, int j, double v) {
    const auto& G = q.grid();
    const double target = v * v;
    if (q(0, j) < target) return 0.0;
    int i = -1;
    for (int k = G.n_r() - 1; k >= 0; --k)
        if (q(k, j) >= target && q(k + 1, j) < target) {
            i = k;
            break;
        }
    if (i < 0) return G.y_max();
    int first = std::min(i - 1, G.n_r() - 3);
    double xs[4], fs[4];
    for (int m = 0; m < 4; ++m) {
        const int si = first + m;
        xs[m] = G.signed_y(si);
        fs[m] = q.values()[G.mirrored(si, j)];
    }
    auto g = [&](double y) { return lagrange4(y, xs, fs) - target; };
    const double a = G.y(i), b = G.y(i + 1);
    if (g(a) >= 0.0 && g(b) <= 0.0 && g(a) != g(b)) return brent(g, a, b, 1e-15);
    const double qa = q(i, j), qb = q(i + 1, j);
    return a + (qa - target) / (qa - qb) * (b - a);
}

TipField build_tip(const ScalarField& q_in, double theta, int n_v) {
    ScalarField q = q_in;
    fill_exterior(q);
    const auto& G = q.grid();
    TipField tip(n_v, G.n_phi(), 2 * theta);
    for (int k = 0; k <= n_v; ++k)
        for (int j = 0; j < G.n_phi(); ++j) tip.at(k, j) = invert_ray(q, j, tip.v(k));
    return tip;
}

ScalarField FlowState::v() const {
    ScalarField out(q.grid_ptr());
    for (size_t n = 0; n < q.values().size(); ++n) out.values()[n] = q.values()[n] > 0.0 ? std::sqrt(q.values()[n]) : 0.0;
    return out;
}

void sync_tip(FlowState& s) {
    if (s.q(0, 0) <= 4 * s.theta * s.theta) {
        s.tip = TipField();
        s.tip_radius.assign(s.grid().n_phi(), 0.0);
        return;
    }
    s.tip = build_tip(s.q, s.theta);
    s.tip_radius.resize(s.grid().n_phi());
    for (int j = 0; j < s.grid().n_phi(); ++j) s.tip_radius[j] = s.tip.at(0, j);
}

FlowState make_from_square(GridPtr grid, FlowMode mode, double time,
                           const std::function<double(double, double)>& qf, double theta, double L) {
    require(theta > 0.0 && theta < 1.0, ErrorKind::parameter, "theta must lie in (0, 1)");
    FlowState s;
    s.mode = mode;
    s.theta = theta;
    s.L = L;
    if (mode == FlowMode::renormalized) {
        s.tau = time;
        s.center = 0.0;
        s.t = -std::exp(-time);
    } else {
        s.t = time;
    }
    s.q = sample(grid, [&](double y, double p) { return qf(y * std::cos(p), y * std::sin(p)); });
    fill_exterior(s.q);
    sync_tip(s);
    return s;
}

FlowState make_renormalized(const ScalarField& v, double tau, double theta, double L) {
    FlowState s;
    s.mode = FlowMode::renormalized;
    s.tau = tau;
    s.t = -std::exp(-tau);
    s.theta = theta;
    s.L = L;
    s.q = signed_square(v);
    fill_exterior(s.q);
    sync_tip(s);
    return s;
}

FlowState make_unrescaled(const ScalarField& V, double t) {
    FlowState s;
    s.mode = FlowMode::unrescaled;
    s.t = t;
    s.q = signed_square(V);
    fill_exterior(s.q);
    sync_tip(s);
    return s;
}

double stable_dt(const FlowState& s, double c_cfl) {
    const auto& G = s.grid();
    const int m = implicit_rings(G);
    double h2 = (G.y(1) - G.y(0)) * (G.y(1) - G.y(0));
    double adv = std::numeric_limits<double>::infinity();
    for (int i = 1; i < G.n_r(); ++i) {
        const double dy = std::min(G.y(i + 1) - G.y(i), G.y(i) - G.y(i - 1));
        double h = dy;
        if (i > m) h = std::min(h, G.y(i) * G.dphi());
        h2 = std::min(h2, h * h);
        if (s.mode == FlowMode::renormalized) adv = std::min(adv, dy / (0.5 * G.y(i)));
    }
    return std::min(c_cfl * h2, 0.5 * adv);
}

namespace {

void advance(FlowState& s, double dt, bool sync) {
    require(dt > 0.0 && std::isfinite(dt), ErrorKind::parameter, "step must be positive");
    const auto& G = s.grid();
    const bool renorm = s.mode == FlowMode::renormalized;
    const int n = G.n_phi();
    const int m = implicit_rings(G);
    require(s.q(0, 0) > 0.0, ErrorKind::domain, "the body has disappeared");

    std::vector<double> acoef;
    const ScalarField F0 = rhs_q_impl(s.q, renorm, &acoef, m);
    ScalarField q1 = s.q;
    for (size_t k = 0; k < q1.values().size(); ++k)
        if (s.q.values()[k] > 0.0) q1.values()[k] += 0.5 * dt * F0.values()[k];

    // Implicit angular diffusion on the rings near the pole.
    const double h = G.dphi();
    const double w[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd b(n);
    for (int i = 1; i <= m; ++i) {
        const double y = G.y(i);
        M.setIdentity();
        for (int j = 0; j < n; ++j) {
            const double qij = s.q(i, j);
            if (qij <= 0.0) {
                b[j] = q1(i, j);
                continue;
            }
            const double a = acoef[G.index(i, j)] / (y * y * h * h);
            double Aq = 0.0;
            for (int o = -2; o <= 2; ++o) {
                Aq += a * w[o + 2] * s.q(i, j + o);
                M(j, G.wrap(j + o)) -= 0.5 * dt * a * w[o + 2];
            }
            b[j] = q1(i, j) - 0.5 * dt * Aq;
        }
        const Eigen::VectorXd x = M.partialPivLu().solve(b);
        for (int j = 0; j < n; ++j) q1(i, j) = x[j];
    }
    fill_exterior(q1);

    const ScalarField F1 = rhs_q_impl(q1, renorm);
    ScalarField qn = s.q;
    for (size_t k = 0; k < qn.values().size(); ++k)
        if (s.q.values()[k] > 0.0) qn.values()[k] += dt * F1.values()[k];

    // Sign changes well inside the body signal an unstable step.
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= G.n_r(); ++i) {
            const double x = qn(i, j);
            if (!std::isfinite(x))
                fail(ErrorKind::step_size, "non-finite value; retry with dt <= " + std::to_string(0.5 * dt));
            if (i + 3 <= G.n_r() && s.q(i + 3, j) > 0.0 && s.q(i, j) > 0.0 && x <= 0.0)
                fail(ErrorKind::step_size, "profile changed sign inside the body; retry with dt <= " +
                                               std::to_string(0.5 * dt));
        }
    fill_exterior(qn);
    s.q = std::move(qn);
    if (renorm) {
        s.tau += dt;
        s.t = s.center - std::exp(-s.tau);
    } else {
        s.t += dt;
    }
    if (sync) sync_tip(s);
}

} // namespace

void step(FlowState& s, double dt) { advance(s, dt, true); }

RunResult run(FlowState state, double time_end, const RunOptions& opt) {
    require(opt.snapshot_every > 0.0, ErrorKind::parameter, "snapshot spacing must be positive");
    require(time_end >= state.time(), ErrorKind::parameter, "run must end after it starts");
    RunResult res;
    res.history = std::make_shared<SnapshotHistory>();
    res.history->set_capacity(opt.capacity);
    res.history->push_square(state.time(), state.q);
    const double dt_max = stable_dt(state, opt.c_cfl);
    const auto& G = state.grid();
    auto status = [&]() {
        if (state.mode != FlowMode::renormalized || !opt.stop_on_collapse) return RunStatus::completed;
        const double qmax = *std::max_element(state.q.values().begin(), state.q.values().end());
        if (qmax < opt.collapse_v * opt.collapse_v) return RunStatus::collapsed;
        if (state.q(0, 0) > opt.escape_v * opt.escape_v || outermost_interior(state.q) >= G.n_r() - 3)
            return RunStatus::escaped;
        return RunStatus::completed;
    };
    res.status = status();
    double next = state.time() + opt.snapshot_every;
    while (res.status == RunStatus::completed && state.time() < time_end - 1e-12) {
        const double target = std::min(next, time_end);
        const int k = std::max(1, static_cast<int>(std::ceil((target - state.time()) / dt_max - 1e-9)));
        const double dt = (target - state.time()) / k;
        for (int s = 0; s < k; ++s) {
            advance(state, dt, false);
            ++res.steps;
            res.status = status();
            if (opt.observer) opt.observer(state);
            if (res.status != RunStatus::completed) break;
        }
        if (res.status != RunStatus::completed) break;
        // Land exactly on the target time to keep snapshot times clean.
        if (state.mode == FlowMode::renormalized) {
            state.tau = target;
            state.t = state.center - std::exp(-target);
        } else {
            state.t = target;
        }
        if (target >= next - 1e-12) {
            res.history->push_square(target, state.q);
            next += opt.snapshot_every;
        } else if (target > res.history->tau_max()) {
            res.history->push_square(target, state.q);
        }
    }
    sync_tip(state);
    res.state = std::move(state);
    return res;
}

namespace {

double inner_radius_sq(const std::function<double(double, double)>& q0, double reach) {
    // min |x|^2 + q0(x) over the body, sampled along rays up to the rim.
    double best = q0(0.0, 0.0);
    const int nr = 64;
    for (int a = 0; a < nr; ++a) {
        const double p = 2 * std::numbers::pi * a / nr;
        const double c = std::cos(p), s = std::sin(p);
        const double dr = reach / 4000;
        for (int k = 1; k <= 4000; ++k) {
            const double r = k * dr, q = q0(r * c, r * s);
            if (q <= 0.0) {
                best = std::min(best, r * r);
                break;
            }
            best = std::min(best, r * r + q);
        }
    }
    return best;
}

// Unrescaled time of a slice, computed without cancellation against the center.
double slice_time(double center, double tau) { return center - std::exp(-tau); }

FlowState state_from(const FramedSlice& f) {
    FlowState s;
    s.mode = FlowMode::renormalized;
    s.center = f.center;
    s.tau = f.tau;
    s.t = slice_time(f.center, f.tau);
    s.q = f.q;
    return s;
}

// Estimate of t_e from a nearly round slice: q(0) = 6 (t_e - t)/(center - t).
struct RoundEstimate {
    bool have = false;
    double t_e = 0.0;
    double merit = std::numeric_limits<double>::infinity();

    void observe(const FlowState& st) {
        const double q00 = st.q(0, 0);
        const double l2 = q00 / 6.0;
        if (std::abs(l2 - 1.0) > 0.3) return;
        const auto& G = st.grid();
        double rmin = 1e300, rmax = 0.0;
        for (int j = 0; j < G.n_phi(); j += std::max(1, G.n_phi() / 16)) {
            const double r = invert_ray(st.q, j, 0.0);
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
        }
        const double asph = (rmax - rmin) / rmax + std::abs(rmax * rmax / q00 - 1.0);
        // Prefer well-rounded slices whose departure from the fixed point
        // dominates the shape error.
        const double m = asph / std::max(std::abs(l2 - 1.0), 1e-12);
        if (asph < 0.05 && m < merit) {
            merit = m;
            have = true;
            t_e = st.center + (l2 - 1.0) * std::exp(-st.tau);
        }
    }
};

} // namespace

FramedSlice reframe(const FramedSlice& f, double c_new, const GridPtr& grid) {
    const double d = c_new - f.center;
    const double gap = d + std::exp(-f.tau); // c_new - t
    require(gap > 0.0, ErrorKind::domain, "new center must lie after the slice");
    const double s2 = gap * std::exp(f.tau), s = std::sqrt(s2);
    FramedSlice out{c_new, -std::log(gap), ScalarField()};
    if (d == 0.0 && f.q.grid().same_as(*grid)) {
        out.q = f.q;
    } else {
        out.q = sample(grid, [&](double y, double p) {
            return interpolate(f.q, s * y * std::cos(p), s * y * std::sin(p)) / s2;
        });
    }
    fill_exterior(out.q);
    return out;
}

ExtinctionResult find_extinction(const std::function<double(double, double)>& q0, double t_start, const GridPtr& grid,
                                 const ExtinctionOptions& opt) {
    const double qc = q0(0.0, 0.0);
    require(qc > 0.0, ErrorKind::domain, "initial body must contain the origin");
    require(opt.trunk_tol > 0.0 && opt.history_tol > 0.0, ErrorKind::parameter, "tolerances must be positive");
    // Extent of the body and the largest S^1 radius.
    double reach = 0.0, qmax = qc;
    for (int a = 0; a < 64; ++a) {
        const double p = 2 * std::numbers::pi * a / 64;
        double r = 0.0, dr = 1e-2 * std::sqrt(qc);
        int guard = 0;
        while (q0(r * std::cos(p), r * std::sin(p)) > 0.0) {
            qmax = std::max(qmax, q0(r * std::cos(p), r * std::sin(p)));
            r += dr;
            require(++guard < 1000000, ErrorKind::domain, "initial body is not compact");
        }
        reach = std::max(reach, r);
    }
    const double r_in2 = inner_radius_sq(q0, reach + 1.0);
    ExtinctionResult out;
    out.t_start = t_start;
    double lo = t_start + r_in2 / 6.0, hi = t_start + qmax / 2.0;
    const double scale = hi - t_start;
    const auto& G = *grid;

    // Trusted slices in their own frames; the last one is where trials resume.
    std::vector<FramedSlice> trunk;
    RunOptions ro = opt.run;
    ro.snapshot_every = opt.keep_history ? opt.run.snapshot_every : 1.0;
    ro.stop_on_collapse = true;

    auto start = [&](double c, FlowState& s) {
        if (trunk.empty()) {
            const double tau_s = -std::log(c - t_start);
            const double lam = std::exp(-0.5 * tau_s);
            if (reach / lam >= G.y_max() - 4 * (G.y_max() / G.n_r())) return false;
            const double g = std::exp(tau_s);
            FramedSlice f{c, tau_s, sample(grid, [&](double y, double p) {
                              return g * q0(lam * y * std::cos(p), lam * y * std::sin(p));
                          })};
            fill_exterior(f.q);
            s = state_from(f);
            s.t = t_start;
        } else {
            s = state_from(reframe(trunk.back(), c, grid));
        }
        return outermost_interior(s.q) < G.n_r() - 3;
    };
    // Relative frame distortion of a slice at tau in the frame of an endpoint.
    auto distortion = [&](double tau) { return (hi - lo) * std::exp(tau); };

    double c = 0.5 * (lo + hi);
    int stalled = 0;
    while (true) {
        if (out.iterations >= opt.max_iter) break;
        ++out.iterations;
        FlowState s;
        RoundEstimate est;
        RunResult r;
        const bool fits = start(c, s);
        if (fits) {
            RunOptions rt = ro;
            rt.observer = [&](const FlowState& st) { est.observe(st); };
            r = run(std::move(s), s.tau + opt.trial_span, rt);
        } else {
            r.status = RunStatus::escaped;
        }
        const double width = hi - lo;
        if (r.status == RunStatus::collapsed)
            hi = std::min(hi, c);
        else if (r.status == RunStatus::escaped)
            lo = std::max(lo, c);
        else {
            // The trial stayed bounded over its whole span: the bracket cannot
            // be resolved further with this budget.
            out.t_e = c;
            out.bracket_lo = lo;
            out.bracket_hi = hi;
            lo = hi = c;
        }
        stalled = (hi - lo) > 0.5 * width ? stalled + 1 : 0;

        // Extend the trunk with the trial slices that the bracket now pins down.
        // The horizon is judged in the frame of the current best center.
        const double mid = 0.5 * (lo + hi);
        auto past_horizon = [&](const FramedSlice& f) {
            const FramedSlice g = reframe(f, mid, grid);
            return opt.horizon(g.q, g.tau);
        };
        if (fits && r.history && !out.horizon_reached) {
            const double t_last = trunk.empty() ? -std::numeric_limits<double>::infinity()
                                                : slice_time(trunk.back().center, trunk.back().tau);
            for (const auto& sn : r.history->snapshots()) {
                if (slice_time(c, sn.tau) <= t_last) continue;
                if (distortion(sn.tau) > opt.trunk_tol) break;
                trunk.push_back({c, sn.tau, sn.q});
                if (opt.horizon && past_horizon(trunk.back())) {
                    out.horizon_reached = true;
                    break;
                }
            }
            if (!opt.keep_history && trunk.size() > 1) trunk.erase(trunk.begin(), trunk.end() - 1);
        }
        if (lo == hi) break;

        bool history_ok = !opt.keep_history || trunk.empty() ||
                          ((!opt.horizon || out.horizon_reached) && distortion(trunk.back().tau) <= opt.history_tol);
        if (history_ok && opt.keep_history && opt.horizon && !trunk.empty() && !past_horizon(trunk.back())) {
            // The horizon was called in a frame that has since moved: keep extending.
            out.horizon_reached = false;
            history_ok = false;
        }
        if (est.have && est.t_e > lo && est.t_e < hi && std::abs(est.t_e - c) < opt.rel_tol * scale && history_ok) {
            c = est.t_e;
            break;
        }
        if (hi - lo < opt.rel_tol * scale && history_ok) {
            c = 0.5 * (lo + hi);
            break;
        }
        double next = 0.5 * (lo + hi);
        if (est.have && est.t_e > lo && est.t_e < hi && stalled < 2) next = est.t_e;
        if (next <= lo || next >= hi) break; // bracket exhausted in floating point
        c = next;
    }
    if (lo != hi) {
        out.t_e = std::clamp(c, lo, hi);
        out.bracket_lo = lo;
        out.bracket_hi = hi;
    }
    if (opt.keep_history) {
        out.history = std::make_shared<SnapshotHistory>();
        for (const auto& f : trunk) {
            if (f.center - std::exp(-f.tau) >= out.t_e) break;
            const FramedSlice g = reframe(f, out.t_e, grid);
            if (out.history->empty() || g.tau > out.history->tau_max()) out.history->push_square(g.tau, g.q);
        }
    }
    return out;
}

ExtinctionResult find_extinction(const ScalarField& V0, double t_start, const GridPtr& grid,
                                 const ExtinctionOptions& opt) {
    const auto& G = V0.grid();
    for (int j = 0; j < G.n_phi(); ++j)
        require(V0(G.n_r(), j) <= v_floor, ErrorKind::domain, "initial body reaches the edge of its grid");
    const ScalarField Q = signed_square(V0);
    const double edge = G.y_max();
    auto q0 = [&](double x1, double x2) {
        const double r = std::hypot(x1, x2);
        if (r >= edge) return -1.0 - (r - edge);
        return interpolate(Q, x1, x2);
    };
    return find_extinction(q0, t_start, grid, opt);
}

Renormalized renormalize(const ScalarField& V, double t, double t_e, const GridPtr& grid) {
    require(t < t_e, ErrorKind::domain, "renormalization needs t < t_e");
    const double s = std::sqrt(t_e - t);
    const ScalarField Q = signed_square(V);
    const double edge = V.grid().y_max();
    Renormalized r;
    r.tau = -std::log(t_e - t);
    r.v = sample(grid, [&](double y, double p) {
        const double x = y * s;
        if (x >= edge) return 0.0;
        const double q = interpolate(Q, x * std::cos(p), x * std::sin(p)) / (s * s);
        return q > 0.0 ? std::sqrt(q) : 0.0;
    });
    return r;
}

ZoomedTip zoomed_tip(const FlowState& s, int j, int n_rho) {
    require(s.mode == FlowMode::renormalized && s.tau < 0.0, ErrorKind::parameter,
            "zoomed tip needs a renormalized state with tau < 0");
    ScalarField q = s.q;
    fill_exterior(q);
    const double T = std::sqrt(std::abs(s.tau));
    const double vmax = std::sqrt(std::max(q(0, j), 0.0));
    const double Y0 = invert_ray(q, j, 0.0);
    ZoomedTip z;
    for (int k = 0; k < n_rho; ++k) {
        const double rho = s.L * k / (n_rho - 1);
        const double v = rho / T;
        if (v >= vmax) break;
        z.rho.push_back(rho);
        z.Z.push_back(T * (invert_ray(q, j, v) - Y0));
    }
    return z;
}

ZoomedTip zoomed_tip(const TipField& tip, double tau, int j, double L, int n_rho) {
    require(!tip.empty(), ErrorKind::parameter, "tip patch not populated");
    require(tau < 0.0, ErrorKind::parameter, "zoomed tip needs tau < 0");
    const double T = std::sqrt(std::abs(tau));
    const double rho_max = std::min(L, T * tip.v_top);
    ZoomedTip z;
    const double Y0 = tip.at(0, j);
    for (int k = 0; k < n_rho; ++k) {
        const double rho = rho_max * k / (n_rho - 1);
        const double v = rho / T;
        int i = std::min(static_cast<int>(v / tip.dv()), tip.n_v - 1);
        const int first = std::min(i - 1, tip.n_v - 3);
        double xs[4], fs[4];
        for (int m = 0; m < 4; ++m) {
            xs[m] = (first + m) * tip.dv();
            fs[m] = tip.at(std::abs(first + m), j);
        }
        z.rho.push_back(rho);
        z.Z.push_back(T * (lagrange4(v, xs, fs) - Y0));
    }
    return z;
}

void write_tip_csv(const std::string& path, const TipField& tip) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    require(f != nullptr, ErrorKind::io, "cannot open " + path);
    std::fprintf(f, "# v_nodes=%d phi_nodes=%d v_top=%.17g\n", tip.n_v + 1, tip.n_phi, tip.v_top);
    for (int k = 0; k <= tip.n_v; ++k)
        for (int j = 0; j < tip.n_phi; ++j)
            std::fprintf(f, "%d,%d,%.17g,%.17g,%.17g\n", k, j, tip.v(k), tip.phi(j), tip.at(k, j));
    std::fclose(f);
}

} // namespace ovalab
