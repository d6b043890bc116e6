#pragma once

#include "ovalab/grid.hpp"
#include "ovalab/history.hpp"
#include "ovalab/shrinkers.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ovalab {

// Inverse profile on the tip patch: Y(v_k, phi_j) with v_k = k * v_top / n_v.
struct TipField {
    int n_v = 0;
    int n_phi = 0;
    double v_top = 0.0;
    std::vector<double> Y; // index k * n_phi + j

    TipField() = default;
    TipField(int n_v, int n_phi, double v_top);
    double dv() const { return v_top / n_v; }
    double v(int k) const { return k * dv(); }
    double phi(int j) const;
    double& at(int k, int j) { return Y[static_cast<size_t>(k) * n_phi + wrap(j)]; }
    double at(int k, int j) const { return Y[static_cast<size_t>(k) * n_phi + wrap(j)]; }
    int wrap(int j) const { return ((j % n_phi) + n_phi) % n_phi; }
    bool empty() const { return Y.empty(); }
};

// Right-hand side of the renormalized profile equation
//   v_t = (delta_ij - v_i v_j / (1 + |Dv|^2)) v_ij - (y/2) v_y + v/2 - 1/v
// written in polar coordinates. Nodes with v <= v_floor are outside and get 0.
ScalarField rhs_renormalized_v(const ScalarField& v);

// The same operator in Cartesian form with centered second-order differences
// of step h applied to a function of (y1, y2). Used to cross-check the polar
// discretization.
double rhs_cartesian_v(const std::function<double(double, double)>& v, double y1, double y2, double h);

// Unrescaled profile equation V_t = (delta_ij - V_i V_j/(1+|DV|^2)) V_ij - 1/V.
ScalarField rhs_unrescaled_V(const ScalarField& V);

// Equations for the signed square q = v^2. They stay regular across the free
// boundary as long as Dq does not vanish there:
//   q_t = (delta_ij - q_i q_j/(4q+|Dq|^2)) q_ij - 2|Dq|^2/(4q+|Dq|^2) [- (y/2) q_y + q] - 2.
// Only nodes with q > 0 are evaluated; the rest of the output is 0.
ScalarField rhs_renormalized_q(const ScalarField& q);
ScalarField rhs_unrescaled_q(const ScalarField& q);

// Inverse profile equation on the tip patch, with Y_v(0) = 0 imposed by even
// reflection. The (1/v) Y_v term is replaced by Y_vv at v = 0.
TipField rhs_renormalized_Y(const TipField& Y, double tau);

// Continue q past the free boundary along each ray (C^1, quadratic for two
// cells and then linear). Interior values are untouched.
void fill_exterior(ScalarField& q);

// Y(v) along ray j of a signed-square field: the outermost y with q = v^2.
// Returns 0 if v^2 exceeds the values on the ray.
double invert_ray(const ScalarField& q, int j, double v);

// Tip patch on [0, 2 theta] rebuilt from q by inversion along rays.
TipField build_tip(const ScalarField& q, double theta, int n_v = 32);

enum class FlowMode { renormalized, unrescaled };

struct FlowState {
    FlowMode mode = FlowMode::renormalized;
    double tau = 0.0;    // renormalized time
    double t = 0.0;      // unrescaled time
    double center = 0.0; // extinction time used for renormalization
    double theta = 0.2;
    double L = 10.0;
    ScalarField q;       // signed square of the profile
    TipField tip;
    std::vector<double> tip_radius; // Y(0, phi_j)

    ScalarField v() const;
    const PolarGrid& grid() const { return q.grid(); }
    double time() const { return mode == FlowMode::renormalized ? tau : t; }
};

// Renormalized state at time tau from a profile field.
FlowState make_renormalized(const ScalarField& v, double tau, double theta = 0.2, double L = 10.0);
// Unrescaled state at time t.
FlowState make_unrescaled(const ScalarField& V, double t);
// State from a signed square given as a function on the grid.
FlowState make_from_square(GridPtr grid, FlowMode mode, double time,
                           const std::function<double(double y1, double y2)>& q, double theta = 0.2,
                           double L = 10.0);

// Rebuild the tip patch and tip radii from q.
void sync_tip(FlowState& s);

// Largest step allowed by the parabolic restriction dt = c_cfl min(dy, y dphi)^2
// over explicitly treated rings.
double stable_dt(const FlowState& s, double c_cfl = 0.2);

// One step of size dt: rings close to the pole treat the angular diffusion
// implicitly, everything else is explicit second order. Throws a step_size
// error if q changes sign well inside the body.
void step(FlowState& s, double dt);

struct RunOptions {
    double snapshot_every = 0.05;
    double c_cfl = 0.2;
    size_t capacity = 0; // history ring-buffer size, 0 = unlimited
    // Stop early when the body has collapsed or escaped the grid.
    bool stop_on_collapse = true;
    double collapse_v = 0.6; // renormalized: max v below this
    double escape_v = 4.0;   // renormalized: v(0) above this
    // Called after every step; the tip patch of the state is only refreshed at
    // the end of the run.
    std::function<void(const FlowState&)> observer;
};

enum class RunStatus { completed, collapsed, escaped };

struct RunResult {
    FlowState state;
    std::shared_ptr<SnapshotHistory> history;
    RunStatus status = RunStatus::completed;
    int steps = 0;
};

RunResult run(FlowState state, double time_end, const RunOptions& opt = {});

struct ExtinctionOptions {
    double rel_tol = 1e-7; // on t_e relative to the time to extinction at t_start
    int max_iter = 60;
    double trial_span = 40.0; // renormalized time covered by one trial at most
    // Trials restart from the latest slice whose frame is known to within this
    // relative scale distortion.
    double trunk_tol = 0.1;
    // Return the trusted slices, renormalized about the final t_e, with a frame
    // distortion of at most history_tol.
    bool keep_history = false;
    double history_tol = 1e-4;
    // When set, the history is not extended past the first slice for which
    // this returns true.
    std::function<bool(const ScalarField& q, double tau)> horizon;
    RunOptions run;
};

struct ExtinctionResult {
    double t_e = 0.0;
    double bracket_lo = 0.0, bracket_hi = 0.0;
    int iterations = 0;
    double t_start = 0.0;
    bool horizon_reached = false;
    std::shared_ptr<SnapshotHistory> history;
};

// Extinction time of the flow starting from V^2 = q0(x1, x2) at t_start. Runs
// renormalized flows about trial extinction times on the given grid: a trial
// that is too late makes the renormalized body collapse, one that is too early
// makes it blow up. Every trial is the same unrescaled flow seen in another
// frame, so later trials resume from the latest slice that is already pinned
// down by the bracket. Round late slices also give a direct estimate of t_e.
ExtinctionResult find_extinction(const std::function<double(double, double)>& q0, double t_start,
                                 const GridPtr& grid, const ExtinctionOptions& opt = {});
// Same, with the unrescaled initial slice given on a polar grid in x.
ExtinctionResult find_extinction(const ScalarField& V0, double t_start, const GridPtr& grid,
                                 const ExtinctionOptions& opt = {});

// Signed square of a renormalized slice (frame center, time tau) seen about
// another center: q'(y) = q(s y)/s^2 with s^2 = (center' - t)/(center - t).
struct FramedSlice {
    double center = 0.0;
    double tau = 0.0;
    ScalarField q;
};
FramedSlice reframe(const FramedSlice& slice, double new_center, const GridPtr& grid);

// v(y) = V(y sqrt(t_e - t)) / sqrt(t_e - t) resampled on grid; tau = -log(t_e - t).
struct Renormalized {
    ScalarField v;
    double tau = 0.0;
};
Renormalized renormalize(const ScalarField& V, double t, double t_e, const GridPtr& grid);

struct ZoomedTip {
    std::vector<double> rho, Z;
};
// Z(rho) = |tau|^{1/2} (Y(|tau|^{-1/2} rho, phi_j) - Y(0, phi_j)) on [0, L].
ZoomedTip zoomed_tip(const FlowState& s, int j, int n_rho = 101);
ZoomedTip zoomed_tip(const TipField& tip, double tau, int j, double L, int n_rho = 101);

void write_tip_csv(const std::string& path, const TipField& tip);

} // namespace ovalab
