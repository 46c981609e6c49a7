#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rmfg/driver.hpp"
#include "rmfg/model.hpp"
#include "rmfg/simulate.hpp"

namespace rmfg {

// Conditional expectations are projected on functions of the time-t state
// (and, for density-weighted targets, multiplied by q_t, which matches the
// product structure of the adjoint).
struct RegressionBasis {
    enum class Kind { Polynomial, LocalBins };
    Kind kind = Kind::Polynomial;
    int degree = 3;
    int bins = 16;
    bool multiply_by_density = false;  // features scaled by q_t (adjoint under a tilt)
    double ridge = 1e-8;
};

struct ValueSolution {
    int n_paths = 0, n_steps = 0, d = 1;
    std::vector<double> Y;  // [path][node]
    std::vector<double> Z;  // [path][step][d]
    std::vector<double> residual_history;  // per Picard iteration, max |change|
    bool picard_converged = true;

    double y(int p, int k) const { return Y[static_cast<std::size_t>(p) * (n_steps + 1) + k]; }
    const double* z(int p, int k) const {
        return Z.data() + (static_cast<std::size_t>(p) * n_steps + k) * d;
    }
};

struct AdjointSolution {
    int n_paths = 0, n_steps = 0, n = 1, d = 1;
    std::vector<double> p;  // [path][node][n]
    std::vector<double> k;  // [path][step][n][d]; empty unless requested
    bool k_computed = false;

    const double* p_at(int path, int node) const {
        return p.data() + (static_cast<std::size_t>(path) * (n_steps + 1) + node) * n;
    }
    const double* k_at(int path, int step) const {
        return k.data() + (static_cast<std::size_t>(path) * n_steps + step) * n * d;
    }
};

// Backward regression solver for
//   -dY = (f(t, Y, Z) + ell(t, psi_t)) dt - Z . dW,  Y_T = terminal,
// implicit in Y via per-step Picard iteration, Z from increment regression.
ValueSolution solve_value_bsde(const StatePaths& X, const ControlField& psi,
                               const std::vector<double>& terminal, const DriverSpec& driver,
                               const RunningCostSpec& ell, const RegressionBasis& basis,
                               int picard_iters, const BrownianEnsemble& W,
                               const DensityProcess* weight = nullptr, double picard_tol = 1e-6);

// Linear adjoint backward equation
//   -dp = b_t^T p dt - k dW,  p_T = terminal_grad (per path, R^n),
// solved in one sweep; k is regressed only when needed (r_flag = 1).
AdjointSolution solve_adjoint_bsde(const StatePaths& X, const DensityProcess& q,
                                   const ModelCoefficients& coeffs,
                                   const std::vector<double>& terminal_grad,
                                   const RegressionBasis& basis, const BrownianEnsemble& W,
                                   bool compute_k = false);

// Pointwise gradient map (Y*, Z*) = (df/dy, df/dz)(t, Y, Z) with |y*| clipped
// to the driver's alpha bound; the clip count is reported and should be zero
// for compliant drivers.
NatureControl nature_control_from_value(const DriverSpec& driver, const ValueSolution& v,
                                        const TimeGrid& grid, long* clip_count = nullptr);

}  // namespace rmfg
