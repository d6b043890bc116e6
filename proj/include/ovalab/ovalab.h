/* C interface of the ovalab library.
 *
 * Objects are opaque handles created by ovl_*_new / ovl_*_read style calls and
 * released with the matching ovl_*_free. Every fallible call returns an
 * ovl_status; on failure ovl_last_error() describes the problem (per thread).
 * Borrowed pointers stay valid until the owning handle is freed.
 */
#ifndef OVALAB_OVALAB_H
#define OVALAB_OVALAB_H

#include <stddef.h>

#if defined(_WIN32)
#define OVL_API __declspec(dllexport)
#else
#define OVL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes. */
typedef enum {
    OVL_OK = 0,
    OVL_ERR_PARAMETER = 2, /* bad arguments, shapes, files */
    OVL_ERR_COVERAGE = 3,  /* window, grid or budget exhausted */
    OVL_ERR_NUMERICAL = 4  /* degeneracy, step size, search failure */
} ovl_status;

typedef struct ovl_grid ovl_grid;
typedef struct ovl_field ovl_field;
typedef struct ovl_history ovl_history;
typedef struct ovl_bowl ovl_bowl;
typedef struct ovl_run ovl_run;
typedef struct ovl_trajectory ovl_trajectory;
typedef struct ovl_config ovl_config;
typedef struct ovl_flow ovl_flow;
typedef struct ovl_table ovl_table;

OVL_API const char* ovl_version(void);
OVL_API const char* ovl_last_error(void);
/* Strings returned through char** arguments are released with this. */
OVL_API void ovl_string_free(char* s);

/* ---- grids and fields ---------------------------------------------- */

OVL_API ovl_status ovl_grid_new(int n_r, int n_phi, double y_max, ovl_grid** out);
/* Radial nodes concentrated around y = center (tanh stretching). */
OVL_API ovl_status ovl_grid_new_clustered(int n_r, int n_phi, double y_max, double center, double width,
                                          double strength, ovl_grid** out);
OVL_API void ovl_grid_free(ovl_grid* g);
OVL_API void ovl_grid_shape(const ovl_grid* g, int* n_r, int* n_phi, double* y_max);

typedef enum {
    OVL_MODEL_BUBBLE_SHEET = 0, /* sqrt 2 */
    OVL_MODEL_SPHERE = 1,       /* sqrt(6 - y^2) */
    OVL_MODEL_NECK = 2,         /* sqrt(4 - y2^2) */
    OVL_MODEL_NORMAL_FORM = 3,  /* sqrt 2 - (y^2 - 4)/(sqrt 8 |tau|), clamped at 0 */
    OVL_MODEL_OVAL = 4          /* sqrt(2 - (y^2 - 4)/|tau|): same expansion, square-root rim */
} ovl_model;

OVL_API ovl_status ovl_field_model(const ovl_grid* g, ovl_model model, double tau, ovl_field** out);
/* Ellipsoid slice V(x) of E(a, ell, R) at time T, sampled on g. */
OVL_API ovl_status ovl_field_ellipsoid(const ovl_grid* g, double a, double ell, double R, double T,
                                       ovl_field** out);
/* n must equal (n_r + 1) * n_phi; values are ordered ring by ring. */
OVL_API ovl_status ovl_field_from_values(const ovl_grid* g, const double* values, size_t n, ovl_field** out);
OVL_API ovl_status ovl_field_read_csv(const char* path, ovl_field** out);
OVL_API ovl_status ovl_field_write_csv(const ovl_field* f, const char* path);
OVL_API void ovl_field_values(const ovl_field* f, const double** values, size_t* n);
/* Borrowed grid of a field. */
OVL_API const ovl_grid* ovl_field_grid(const ovl_field* f);
OVL_API void ovl_field_free(ovl_field* f);

/* ---- shrinkers ---------------------------------------------------- */

OVL_API ovl_status ovl_bowl_solve(double rho_max, double drho, ovl_bowl** out);
OVL_API size_t ovl_bowl_size(const ovl_bowl* b);
OVL_API void ovl_bowl_row(const ovl_bowl* b, size_t i, double* rho, double* z, double* dz);
OVL_API void ovl_bowl_free(ovl_bowl* b);

/* sup |v_t| of the renormalized equation over the nodes with v >= v_min. */
OVL_API ovl_status ovl_shrinker_residual(const ovl_field* v, double v_min, double* sup);

/* ---- evolution ------------------------------------------------------ */

typedef struct {
    double theta;          /* tip patch on [0, 2 theta] */
    double L;
    double snapshot_every; /* history spacing in tau */
    double c_cfl;
} ovl_run_options;

OVL_API void ovl_run_options_default(ovl_run_options* opt);
/* Renormalized flow from the profile v at tau_start to tau_end. */
OVL_API ovl_status ovl_simulate(const ovl_field* v, double tau_start, double tau_end, const ovl_run_options* opt,
                                ovl_run** out);
/* 0 completed, 1 collapsed, 2 escaped the grid. */
OVL_API int ovl_run_status(const ovl_run* r);
OVL_API int ovl_run_steps(const ovl_run* r);
OVL_API double ovl_run_tau(const ovl_run* r);
/* Borrowed history and final profile. */
OVL_API const ovl_history* ovl_run_history(const ovl_run* r);
OVL_API const ovl_field* ovl_run_final(const ovl_run* r);
OVL_API ovl_status ovl_run_write_tip_csv(const ovl_run* r, const char* path);
OVL_API void ovl_run_free(ovl_run* r);

/* ---- histories ------------------------------------------------------ */

OVL_API ovl_status ovl_history_read(const char* dir, ovl_history** out);
OVL_API ovl_status ovl_history_write(const ovl_history* h, const char* dir);
OVL_API void ovl_history_range(const ovl_history* h, double* tau_min, double* tau_max);
OVL_API size_t ovl_history_count(const ovl_history* h);
OVL_API double ovl_history_tau(const ovl_history* h, size_t k);
/* Borrowed grid the snapshots live on. */
OVL_API const ovl_grid* ovl_history_grid(const ovl_history* h);
/* v at tau, linear in tau between snapshots, on the history's own grid. */
OVL_API ovl_status ovl_history_field(const ovl_history* h, double tau, ovl_field** out);
OVL_API void ovl_history_free(ovl_history* h);

/* ---- spectral projection ------------------------------------------ */

typedef struct {
    double tau;
    double coeff[6]; /* 1, y cos, y sin, y^2-4, y^2 cos 2phi, y^2 sin 2phi */
    double alpha[3];
    double S, D;
    double xi[2];
    double Q[2][2];
    double Q_eig[2];
    double stable_residual;
    double width_ratio;
} ovl_spectral;

OVL_API ovl_status ovl_spectral_report(const ovl_field* v, double theta, double tau, ovl_spectral* out);

typedef struct {
    double measured_kappa;
    int quadratic_ok;
    double centering_norm;
    int centering_ok;
    double graphical_max;
    int graphical_ok;
} ovl_kappa;

OVL_API ovl_status ovl_kappa_quadratic(const ovl_history* h, double tau0, double kappa, double theta, ovl_kappa* out);

/* ---- mode dynamics -------------------------------------------------- */

/* Integrates the alpha system from alpha0 at tau0 to tau1 with RK4 step h.
 * Rows hold tau, a1, a2, a3, S, D, xi1, xi2. */
OVL_API ovl_status ovl_modes_integrate(const double alpha0[3], double tau0, double tau1, double h,
                                       ovl_trajectory** out);
OVL_API size_t ovl_trajectory_size(const ovl_trajectory* t);
OVL_API void ovl_trajectory_row(const ovl_trajectory* t, size_t i, double row[8]);
OVL_API int ovl_trajectory_blew_up(const ovl_trajectory* t, double* when);
OVL_API void ovl_trajectory_free(ovl_trajectory* t);

/* ---- diagnostics ---------------------------------------------------- */

typedef struct {
    double tau;
    /* region boundaries in v */
    double v_soliton; /* L / sqrt|tau| */
    double v_collar;  /* 2 theta */
    double concavity_margin;
    double concavity_y, concavity_phi;
    double collar_deviation; /* NaN when the collar holds no node */
    int collar_nodes;
    double cylindrical;
    double huisken;
    double parabolic, intermediate, tip; /* model distances; tip NaN without a tip patch */
} ovl_diagnostics;

/* Diagnostics of a renormalized slice at tau given by its profile. */
OVL_API ovl_status ovl_diagnose(const ovl_field* v, double tau, double theta, double L, double delta, double eps,
                                ovl_diagnostics* out);
/* Same for the slice of a history at tau. */
OVL_API ovl_status ovl_diagnose_history(const ovl_history* h, double tau, double theta, double L, double delta,
                                        double eps, ovl_diagnostics* out);

/* ---- recentering ---------------------------------------------------- */

typedef struct {
    double alpha[2];
    double beta, gamma, phi;
    double b, Gamma;
    double residual;
    double jacobian_det;
    int iterations;
} ovl_recentre;

/* mode is 2 (b, Gamma) or 4 (translation, b, Gamma and rotation). */
OVL_API ovl_status ovl_recentre_solve(const ovl_history* h, double tau0, int mode, double kappa, double theta,
                                      ovl_recentre* out);

/* ---- experiment configuration and pipelines ------------------------ */

OVL_API double ovl_theta_star(void);
OVL_API ovl_status ovl_config_new(ovl_config** out);
/* Reads a configuration file on top of the current values. */
OVL_API ovl_status ovl_config_read(ovl_config* c, const char* path);
OVL_API ovl_status ovl_config_set(ovl_config* c, const char* key, const char* value);
/* Current value of one entry, in the form ovl_config_set accepts. */
OVL_API ovl_status ovl_config_get(const ovl_config* c, const char* key, char** value);
OVL_API ovl_status ovl_config_print(const ovl_config* c, char** text);
OVL_API int ovl_config_workers(const ovl_config* c);
OVL_API void ovl_config_free(ovl_config* c);

typedef struct {
    double a, ell;
    double t_e;
    double lambda;
    double time_shift;
    double tau_crossing;
    int extinction_iterations;
} ovl_flow_info;

/* Runs the ellipsoid E(a, ell) of the configuration to extinction and
 * normalizes it so that its Huisken density crosses the target at tau = 0. */
OVL_API ovl_status ovl_normalize_ellipsoid(const ovl_config* c, double a, ovl_flow** out);
OVL_API void ovl_flow_get_info(const ovl_flow* f, ovl_flow_info* info);
OVL_API const ovl_history* ovl_flow_history(const ovl_flow* f);
OVL_API void ovl_flow_free(ovl_flow* f);

typedef struct {
    double a;
    int ok;
    const char* error; /* borrowed, empty when ok */
    double kappa_measured;
    double R;
    double Q_eig1, Q_eig2;
    double collar_dev;
    double concavity_margin;
    double t_e, lambda;
    double b, Gamma, jacobian_det;
    int kappa_quadratic;
    double seconds;
} ovl_sweep_row;

/* One row per sweep value of the configuration, rows run in parallel. */
OVL_API ovl_status ovl_sweep(const ovl_config* c, ovl_table** out);
OVL_API ovl_status ovl_table_read_csv(const char* path, ovl_table** out);
OVL_API ovl_status ovl_table_write_csv(const ovl_table* t, const char* path);
OVL_API size_t ovl_table_size(const ovl_table* t);
OVL_API void ovl_table_row(const ovl_table* t, size_t i, ovl_sweep_row* row);
OVL_API void ovl_table_free(ovl_table* t);

#ifdef __cplusplus
}
#endif

#endif
