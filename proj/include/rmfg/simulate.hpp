#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmfg/driver.hpp"
#include "rmfg/grid.hpp"
#include "rmfg/model.hpp"

namespace rmfg {

// Seeded Brownian increments on a shared grid. Per-path streams are keyed by
// (seed, path index) only, so the draw is reproducible independently of
// enumeration order and thread count.
struct BrownianEnsemble {
    TimeGrid grid;
    int n_paths = 0;
    int d = 1;
    std::uint64_t seed = 0;
    std::vector<double> dw;  // [path][step][d]

    double* path(int p) { return dw.data() + static_cast<std::size_t>(p) * grid.n_steps * d; }
    const double* path(int p) const {
        return dw.data() + static_cast<std::size_t>(p) * grid.n_steps * d;
    }
    double at(int p, int k, int j) const { return path(p)[static_cast<std::size_t>(k) * d + j]; }
};

BrownianEnsemble sample_brownian(const TimeGrid& grid, int n_paths, int d, std::uint64_t seed);

// Control process over an ensemble: either a per-path open-loop table or an
// affine feedback rule psi(t_k, x) = A_k x + b_k evaluated on the fly.
struct ControlField {
    enum class Param { OpenLoopTable, AffineFeedback };
    Param param = Param::OpenLoopTable;
    int n_paths = 0, n_steps = 0, dim = 1, state_dim = 1;
    std::vector<double> values;    // open loop: [path][step][dim]
    std::vector<double> feedback;  // affine: [step][dim][state_dim + 1], constant last

    static ControlField zero(int n_paths, int n_steps, int dim);
    static ControlField constant(int n_paths, int n_steps, const Eigen::VectorXd& value);
    static ControlField affine_feedback(int n_steps, int dim, int state_dim);

    double* value_at(int p, int k) {
        return values.data() + (static_cast<std::size_t>(p) * n_steps + k) * dim;
    }
    const double* value_at(int p, int k) const {
        return values.data() + (static_cast<std::size_t>(p) * n_steps + k) * dim;
    }
    void eval(int p, int k, const double* x, double* out) const;

    double l2_norm() const;          // sqrt of mean squared entry
    double l2_distance(const ControlField& other) const;
};

struct StatePaths {
    TimeGrid grid;
    int n_paths = 0, n = 1;
    std::vector<double> values;  // [path][node][n]
    std::uint64_t init_seed = 0;

    double* node(int p, int k) {
        return values.data() + (static_cast<std::size_t>(p) * (grid.n_steps + 1) + k) * n;
    }
    const double* node(int p, int k) const {
        return values.data() + (static_cast<std::size_t>(p) * (grid.n_steps + 1) + k) * n;
    }
};

// Euler-Maruyama under drift a + b x + c psi and volatility nu + r sigma[psi].
StatePaths simulate_state(const ModelCoefficients& coeffs, const ControlField& control,
                          const BrownianEnsemble& W, std::uint64_t init_seed);

// Materializes a feedback control as an open-loop table along given paths.
ControlField materialize(const ControlField& control, const StatePaths& X);

struct NatureControl {
    int n_paths = 0, n_steps = 0, d = 1;
    double alpha_bound = 0.0;
    std::vector<double> y_star;  // [path][step]
    std::vector<double> z_star;  // [path][step][d]

    static NatureControl zero(int n_paths, int n_steps, int d, double alpha = 0.0);
    double y(int p, int k) const { return y_star[static_cast<std::size_t>(p) * n_steps + k]; }
    const double* z(int p, int k) const {
        return z_star.data() + (static_cast<std::size_t>(p) * n_steps + k) * d;
    }
    double* z(int p, int k) {
        return z_star.data() + (static_cast<std::size_t>(p) * n_steps + k) * d;
    }
};

// Doleans-Dade density simulated in log space; positive by construction.
struct DensityProcess {
    TimeGrid grid;
    int n_paths = 0;
    bool uses_ystar = false;
    NatureControl nature_control;
    std::vector<double> log_q;  // [path][node]

    double q(int p, int k) const {
        return std::exp(log_q[static_cast<std::size_t>(p) * (grid.n_steps + 1) + k]);
    }
    double log_at(int p, int k) const {
        return log_q[static_cast<std::size_t>(p) * (grid.n_steps + 1) + k];
    }
    double terminal(int p) const { return q(p, grid.n_steps); }

    static DensityProcess unit(const TimeGrid& grid, int n_paths, int d);
};

DensityProcess simulate_density(const NatureControl& nc, const BrownianEnsemble& W,
                                double log_overflow_bound = 50.0);

// Generalized entropy S(q) = E[ integral of q_s f*(s, Y*_s, Z*_s) ds ]
// by per-interval trapezoid in q and path averaging.
McValue generalized_entropy(const DensityProcess& q, const DriverSpec& driver);

// Ent(x) = x (ln x - 1), x > 0.
double ent(double x);

struct DualEntropyResult {
    double value = 0.0;
    double se = 0.0;
    bool overflow = false;
    double max_exponent = 0.0;
};

// S*(psi) for the quadratic benchmark via the Donsker-Varadhan form
// gamma * ln E[exp((1/gamma) integral |psi|^2 dt)].
DualEntropyResult dual_entropy_quadratic(const ControlField& psi, const TimeGrid& grid,
                                         double gamma, double exponent_bound = 500.0);

struct DualityGapResult {
    double S = 0.0, S_se = 0.0;
    double S_star = 0.0, S_star_se = 0.0;
    double cross = 0.0, cross_se = 0.0;  // E[ integral q |zeta|^2 dt ]
    double gap = 0.0;                    // S + S* - cross / gamma
    double tight_gap = 0.0;              // gamma S + S* - cross; 0 at the Gibbs maximizer
    double se = 0.0;
    bool overflow = false;
};

DualityGapResult duality_gap(const DensityProcess& q, const ControlField& zeta, double gamma,
                             const DriverSpec& driver);

struct EntropyMassDiagnostics {
    double e_ent_qT = 0.0;
    double s_q = 0.0;
    double bound_slack = 0.0;
};

EntropyMassDiagnostics entropy_mass_diagnostics(const DensityProcess& q, const DriverSpec& driver,
                                                double C = 4.0);

// mean and standard error of q at a grid node (martingale diagnostics)
McValue density_mass(const DensityProcess& q, int node);

// Binary columnar dump (little-endian doubles) and per-node summary CSV.
void dump_ensemble(const std::string& path, const StatePaths& X);
void summary_csv(const std::string& path, const StatePaths& X);

}  // namespace rmfg
