#pragma once

#include <cstdint>
#include <vector>

#include "rmfg/bsde.hpp"
#include "rmfg/measure.hpp"
#include "rmfg/model.hpp"
#include "rmfg/simulate.hpp"

namespace rmfg {

// J = E[q_T g] + E[ integral q ell dt ] - gamma S(q), with the three terms
// reported separately.
struct CostBreakdown {
    double terminal = 0.0;
    double running = 0.0;
    double entropy = 0.0;  // S(q)
    double J = 0.0;
    double se = 0.0;
};

struct SaddleOptions {
    double damping = 0.5;
    int max_outer = 25;
    double outer_tol = 2e-3;   // joint control/density residual
    int br_max_iters = 80;
    double br_tol = 5e-4;      // weighted-L2 gradient norm
    double br_step = 0.8;      // initial gradient step (backtracking)
    int picard_iters = 50;
    double picard_tol = 1e-6;
    RegressionBasis value_basis;
    RegressionBasis adjoint_basis;
    bool verbose = false;

    SaddleOptions() {
        adjoint_basis.multiply_by_density = true;
    }
};

struct NatureResponse {
    DensityProcess q;
    ValueSolution value;
    double sup_value = 0.0;      // J(psi, q*) at the returned density
    double sup_value_se = 0.0;
    double gibbs_value = 0.0;    // gamma ln E[exp(C_T / gamma)]
    double gibbs_se = 0.0;
    double route_mismatch = 0.0; // E|q_T(bsde) - q_T(terminal tilt)|
    double max_exponent = 0.0;
    long clip_count = 0;
};

struct PontryaginResidual {
    double player_foc = 0.0;
    double nature_foc = 0.0;
    double terminal_p = 0.0;
    double terminal_Y = 0.0;
};

struct SaddleState {
    WeightedMeasure mu;
    ControlField psi;
    DensityProcess q;
    ValueSolution value;
    AdjointSolution adjoint;
    CostBreakdown cost;
    double J = 0.0;
    int iterations = 0;
    bool converged = false;
    double damping_used = 0.0;
    double minimax_gap = 0.0;
    double minimax_gap_se = 0.0;
    std::vector<double> J_history;
    PontryaginResidual residuals;
    // ensemble identity (common random numbers within one solve)
    std::uint64_t brownian_seed = 0;
    std::uint64_t init_seed = 0;
};

CostBreakdown cost_functional(const GameModel& model, const WeightedMeasure& mu,
                              const ControlField& psi, const DensityProcess& q,
                              const StatePaths& X);

// Nature's best response to psi under frozen mu. Quadratic benchmark: the
// value-BSDE route produces the path density while the closed terminal Gibbs
// tilt serves as the agreement diagnostic; custom drivers use the BSDE route
// alone.
NatureResponse nature_best_response(const GameModel& model, const WeightedMeasure& mu,
                                    const ControlField& psi, const StatePaths& X,
                                    const BrownianEnsemble& W, const SaddleOptions& opts);

struct BestResponseDiag {
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    bool line_search_failed = false;
};

// Projected gradient descent on the open-loop table using the adjoint state.
ControlField player_best_response(const GameModel& model, const WeightedMeasure& mu,
                                  const DensityProcess& q, const BrownianEnsemble& W,
                                  std::uint64_t init_seed, const ControlField& start,
                                  const SaddleOptions& opts, BestResponseDiag* diag = nullptr);

SaddleState solve_saddle(const GameModel& model, const WeightedMeasure& mu,
                         const BrownianEnsemble& W, std::uint64_t init_seed,
                         const SaddleOptions& opts, const ControlField* warm_start = nullptr);

// Weighted-L2 norms of the first-order conditions and terminal matches at a
// stored state (the Nature map is cross-checked with a refit on a richer
// basis, so regression error shows up rather than cancelling).
PontryaginResidual pontryagin_residual(const GameModel& model, const SaddleState& s,
                                       const BrownianEnsemble& W, const SaddleOptions& opts);

}  // namespace rmfg
