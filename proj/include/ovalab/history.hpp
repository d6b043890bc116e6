#pragma once

#include "ovalab/grid.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace ovalab {

// A renormalized profile v(y1, y2, tau) available over a window of tau.
class ProfileHistory {
public:
    virtual ~ProfileHistory() = default;
    virtual double tau_min() const = 0;
    virtual double tau_max() const = 0;
    // v at the Cartesian point (y1, y2); 0 outside the body.
    virtual double value(double y1, double y2, double tau) const = 0;
    // v sampled on a grid.
    virtual ScalarField field(const GridPtr& grid, double tau) const;

    bool covers(double tau, double slack = 1e-12) const {
        return tau >= tau_min() - slack && tau <= tau_max() + slack;
    }
};

using HistoryPtr = std::shared_ptr<const ProfileHistory>;

class AnalyticHistory : public ProfileHistory {
public:
    using Fn = std::function<double(double y1, double y2, double tau)>;
    AnalyticHistory(Fn f, double tau_min, double tau_max) : f_(std::move(f)), lo_(tau_min), hi_(tau_max) {}
    double tau_min() const override { return lo_; }
    double tau_max() const override { return hi_; }
    double value(double y1, double y2, double tau) const override;

private:
    Fn f_;
    double lo_, hi_;
};

// Per-ray description of the free boundary of a slice: rim radius and the
// radial derivative of v^2 there (negative).
struct RimTable {
    std::vector<double> radius;
    std::vector<double> slope;
};

// v^2 on the grid, continued past the rim as a negative linear function so
// that interpolation across the free boundary stays smooth.
ScalarField signed_square(const ScalarField& v, const std::optional<RimTable>& rim = std::nullopt);
// Rim table estimated from grid values by extrapolating v^2 along each ray.
RimTable estimate_rim(const ScalarField& v);

// Cubic interpolation of a field at a Cartesian point (polar Lagrange in y with
// reflection across the pole, periodic cubic in phi). Points beyond y_max use
// the outermost ring.
double interpolate(const ScalarField& f, double y1, double y2);

struct Snapshot {
    double tau = 0.0;
    ScalarField v;
    ScalarField q; // signed square used for interpolation
};

class SnapshotHistory : public ProfileHistory {
public:
    SnapshotHistory() = default;
    void push(double tau, const ScalarField& v, const std::optional<RimTable>& rim = std::nullopt);
    // Record a slice given directly by its signed square.
    void push_square(double tau, const ScalarField& q);
    // Keep at most this many snapshots, dropping the oldest (0 = unlimited).
    void set_capacity(size_t n) { capacity_ = n; }
    // Shift every snapshot time by dt.
    void retime(double dt);

    double tau_min() const override;
    double tau_max() const override;
    double value(double y1, double y2, double tau) const override;
    ScalarField field(const GridPtr& grid, double tau) const override;

    const std::vector<Snapshot>& snapshots() const { return snaps_; }
    bool empty() const { return snaps_.empty(); }

private:
    std::pair<int, double> bracket(double tau) const;
    std::vector<Snapshot> snaps_;
    size_t capacity_ = 0;
};

} // namespace ovalab
