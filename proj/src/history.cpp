#include "ovalab/history.hpp"

#include "ovalab/errors.hpp"
#include "ovalab/shrinkers.hpp"
#include "numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ovalab {

ScalarField ProfileHistory::field(const GridPtr& grid, double tau) const {
    require(covers(tau), ErrorKind::coverage, "history does not cover the requested time");
    return sample(grid, [&](double y, double p) { return value(y * std::cos(p), y * std::sin(p), tau); });
}

double AnalyticHistory::value(double y1, double y2, double tau) const {
    require(covers(tau), ErrorKind::coverage, "history does not cover the requested time");
    return f_(y1, y2, tau);
}

RimTable estimate_rim(const ScalarField& v) {
    const auto& G = v.grid();
    RimTable rim;
    rim.radius.assign(G.n_phi(), std::numeric_limits<double>::infinity());
    rim.slope.assign(G.n_phi(), 0.0);
    for (int j = 0; j < G.n_phi(); ++j) {
        int last = -1;
        for (int i = 0; i <= G.n_r(); ++i) {
            if (v(i, j) > v_floor)
                last = i;
            else
                break;
        }
        if (last < 0 || last == G.n_r()) continue;
        if (last < 2) {
            // Too few nodes: linear continuation to the next node.
            const double y0 = G.y(last), y1 = G.y(last + 1);
            const double q0 = v(last, j) * v(last, j);
            rim.radius[j] = 0.5 * (y0 + y1);
            rim.slope[j] = -q0 / (rim.radius[j] - y0);
            continue;
        }
        const double xs[3] = {G.y(last - 2), G.y(last - 1), G.y(last)};
        double qs[3];
        for (int k = 0; k < 3; ++k) qs[k] = v(last - 2 + k, j) * v(last - 2 + k, j);
        // Newton form of the quadratic through the three points.
        const double d1 = (qs[1] - qs[0]) / (xs[1] - xs[0]);
        const double d2 = (qs[2] - qs[1]) / (xs[2] - xs[1]);
        const double c2 = (d2 - d1) / (xs[2] - xs[0]);
        auto q = [&](double x) { return qs[2] + (x - xs[2]) * (d2 + c2 * (x - xs[1])); };
        auto dq = [&](double x) { return d2 + c2 * (2 * x - xs[1] - xs[2]); };
        const double ynext = G.y(last + 1);
        double root;
        if (q(ynext) < 0.0) {
            root = brent(q, xs[2], ynext, 1e-14);
        } else {
            // Quadratic does not cross before the next node: fall back to the
            // secant through the last two points.
            root = xs[2] - qs[2] / std::min(d2, -1e-12);
        }
        rim.radius[j] = root;
        double s = dq(root);
        if (!(s < 0.0)) s = std::min(d2, -1e-12);
        rim.slope[j] = s;
    }
    return rim;
}

ScalarField signed_square(const ScalarField& v, const std::optional<RimTable>& rim_in) {
    const auto& G = v.grid();
    const RimTable rim = rim_in ? *rim_in : estimate_rim(v);
    ScalarField q(v.grid_ptr());
    for (int j = 0; j < G.n_phi(); ++j)
        for (int i = 0; i <= G.n_r(); ++i) {
            const double y = G.y(i);
            if (y < rim.radius[j])
                q(i, j) = v(i, j) * v(i, j);
            else
                q(i, j) = rim.slope[j] * (y - rim.radius[j]);
        }
    return q;
}

double interpolate(const ScalarField& f, double y1, double y2) {
    const auto& G = f.grid();
    const double y = std::min(std::hypot(y1, y2), G.y_max());
    double phi = std::atan2(y2, y1);
    if (phi < 0) phi += 2 * std::numbers::pi;
    const double s = phi / G.dphi();
    int i = G.locate(y);
    int first = i - 1;
    if (first + 3 > G.n_r()) first = G.n_r() - 3;
    const int nphi = G.n_phi();
    const double* data = f.values().data();
    double xs[4], fs[4];
    for (int k = 0; k < 4; ++k) {
        const int si = first + k;
        xs[k] = G.signed_y(si);
        const int ring = std::abs(si);
        const double shift = si < 0 ? nphi / 2 : 0;
        fs[k] = periodic_cubic(std::span<const double>(data + static_cast<size_t>(ring) * nphi, nphi), s + shift);
    }
    return lagrange4(y, xs, fs);
}

void SnapshotHistory::push(double tau, const ScalarField& v, const std::optional<RimTable>& rim) {
    require(snaps_.empty() || tau > snaps_.back().tau, ErrorKind::parameter, "snapshots must increase in tau");
    snaps_.push_back({tau, v, signed_square(v, rim)});
    if (capacity_ && snaps_.size() > capacity_) snaps_.erase(snaps_.begin());
}

void SnapshotHistory::push_square(double tau, const ScalarField& q) {
    require(snaps_.empty() || tau > snaps_.back().tau, ErrorKind::parameter, "snapshots must increase in tau");
    ScalarField v(q.grid_ptr());
    for (size_t n = 0; n < q.values().size(); ++n) v.values()[n] = q.values()[n] > 0.0 ? std::sqrt(q.values()[n]) : 0.0;
    snaps_.push_back({tau, std::move(v), q});
    if (capacity_ && snaps_.size() > capacity_) snaps_.erase(snaps_.begin());
}

void SnapshotHistory::retime(double dt) {
    for (auto& s : snaps_) s.tau += dt;
}

double SnapshotHistory::tau_min() const {
    require(!snaps_.empty(), ErrorKind::coverage, "empty history");
    return snaps_.front().tau;
}

double SnapshotHistory::tau_max() const {
    require(!snaps_.empty(), ErrorKind::coverage, "empty history");
    return snaps_.back().tau;
}

std::pair<int, double> SnapshotHistory::bracket(double tau) const {
    require(covers(tau, 1e-9), ErrorKind::coverage, "history does not cover the requested time");
    if (snaps_.size() == 1) return {0, 0.0};
    auto it = std::upper_bound(snaps_.begin(), snaps_.end(), tau,
                               [](double t, const Snapshot& s) { return t < s.tau; });
    int k = static_cast<int>(it - snaps_.begin()) - 1;
    k = std::clamp(k, 0, static_cast<int>(snaps_.size()) - 2);
    const double w = (tau - snaps_[k].tau) / (snaps_[k + 1].tau - snaps_[k].tau);
    return {k, std::clamp(w, 0.0, 1.0)};
}

double SnapshotHistory::value(double y1, double y2, double tau) const {
    const auto [k, w] = bracket(tau);
    double q = interpolate(snaps_[k].q, y1, y2);
    if (w > 0.0) q = (1 - w) * q + w * interpolate(snaps_[k + 1].q, y1, y2);
    return q > 0.0 ? std::sqrt(q) : 0.0;
}

ScalarField SnapshotHistory::field(const GridPtr& grid, double tau) const {
    const auto [k, w] = bracket(tau);
    if (!snaps_[k].v.grid().same_as(*grid)) return ProfileHistory::field(grid, tau);
    if (w == 0.0) return snaps_[k].v;
    ScalarField out(grid);
    const auto& q0 = snaps_[k].q.values();
    const auto& q1 = snaps_[k + 1].q.values();
    for (size_t n = 0; n < q0.size(); ++n) {
        const double q = (1 - w) * q0[n] + w * q1[n];
        out.values()[n] = q > 0.0 ? std::sqrt(q) : 0.0;
    }
    return out;
}

} // namespace ovalab
