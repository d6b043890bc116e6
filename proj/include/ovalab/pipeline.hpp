#pragma once

#include "ovalab/evolve.hpp"
#include "ovalab/grid.hpp"
#include "ovalab/history.hpp"
#include "ovalab/recenter.hpp"
#include "ovalab/shrinkers.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace ovalab {

// Density halfway between the two cylinders: (4/e + sqrt(2 pi/e)) / 2.
double theta_star();

struct ExperimentConfig {
    // [grid]
    int n_r = 192;
    int n_phi = 48;
    double y_max = 18.0;
    // [regions]
    double theta = 0.2;
    double L = 10.0;
    // [ellipsoid]
    double ell = 3.0;
    double R = 1.0;
    double T = -1.0;
    // [flow]
    double snapshot_every = 0.05;
    double rel_tol = 1e-7;
    double trunk_tol = 0.1;
    double history_tol = 1e-4;
    int max_iter = 80;
    // [normalize]
    double target_density = theta_star();
    // [sweep]
    std::vector<double> sweep_a{0.4, 0.45, 0.5, 0.55, 0.6};
    double tau0 = -8.0;
    double kappa = 1.0;
    double delta = 0.0;
    // [output]
    std::string out_dir = "ovalab-out";
    int threads = 0; // 0 = OVALAB_THREADS or the hardware count

    void validate() const;
    GridPtr grid() const;
};

// Reads `key = value` lines grouped in [section]s; unknown keys are rejected.
ExperimentConfig read_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig read_config(const std::string& path, ExperimentConfig base = {});
// Sets one entry given as "section.key".
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Value of one entry as set_config_value accepts it.
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);
// Every entry with its current value and a comment line; read_config accepts the output.
std::string print_config(const ExperimentConfig& cfg);

// Worker count: explicit setting, else OVALAB_THREADS, else the hardware count.
int worker_count(const ExperimentConfig& cfg);

struct NormalizedFlow {
    EllipsoidSpec spec;
    double t_e = 0.0;           // extinction time of the original flow
    double lambda = 1.0;        // dilation making Theta(1) = Theta* at t = -1
    double time_shift = 0.0;    // t_e: the normalized flow is lambda M_{t_e + t/lambda^2}
    double tau_crossing = 0.0;  // renormalized time of the crossing about t_e
    int extinction_iterations = 0;
    // Renormalized normalized flow: Theta(tau = 0) = Theta*.
    std::shared_ptr<SnapshotHistory> history;
};

// Finds the extinction time, renormalizes about it and retimes so that the
// Huisken density crosses the target at tau = 0.
NormalizedFlow normalize_ellipsoid(const EllipsoidSpec& spec, const ExperimentConfig& cfg);

// Signed square of a history at tau, linear in tau between snapshots.
ScalarField square_at(const SnapshotHistory& h, double tau);

// Signed square of the transformed slice (1+b)^2 q((R_{-phi} y - a)/(1+b), (1+Gamma) tau),
// continued past the rim.
ScalarField transformed_square(const SnapshotHistory& h, const TransformParams& p, double tau, const GridPtr& grid);

struct SweepRow {
    double a = 0.0;
    bool ok = false;
    std::string error;
    double kappa_measured = 0.0;
    double R = 0.0;
    double Q_eig1 = 0.0, Q_eig2 = 0.0;
    double collar_dev = 0.0; // NaN when the collar is empty
    double concavity_margin = 0.0;
    // Bookkeeping
    double t_e = 0.0, lambda = 0.0;
    double b = 0.0, Gamma = 0.0, jacobian_det = 0.0;
    bool kappa_quadratic = false;
    double seconds = 0.0;
};

// Everything derived from one normalized flow at tau0.
SweepRow analyze_flow(const NormalizedFlow& flow, const ExperimentConfig& cfg);
SweepRow sweep_row(double a, const ExperimentConfig& cfg, std::shared_ptr<NormalizedFlow>* keep = nullptr);
std::vector<SweepRow> sweep(const ExperimentConfig& cfg);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& is);

// Snapshot directories: one field file per slice plus an index with the times.
void write_history(const std::string& dir, const SnapshotHistory& h);
std::shared_ptr<SnapshotHistory> read_history(const std::string& dir);

} // namespace ovalab
