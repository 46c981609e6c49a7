#pragma once

#include <cstdint>
#include <vector>

#include "rmfg/measure.hpp"
#include "rmfg/saddle.hpp"

namespace rmfg {

// Pushforward of the effective measure: particle cloud {X_T^i, q_T^i / m}.
WeightedMeasure phi_map(const GameModel& model, const SaddleState& s, const BrownianEnsemble& W);

struct EquilibriumOptions {
    double damping = 0.5;
    int max_iters = 30;
    double tol = 5e-3;          // FM distance between successive iterates
    int resample_to = 0;        // 0: keep the particle count of the ensemble
    SaddleOptions saddle;
    std::uint64_t fresh_seed_offset = 0x0f5eed;  // out-of-sample ensemble
};

struct EquilibriumReport {
    WeightedMeasure mu_star;
    SaddleState saddle;
    std::vector<double> iterate_distances;  // FM(mu_k, mu_{k+1})
    bool converged = false;
    double damping_used = 0.0;
    double self_consistency = 0.0;          // FM(mu*, Phi(mu*)) on a fresh ensemble
    bool used_cesaro = false;               // averaged iterate reported after a stall
};

// Damped fixed-point iteration mu <- (1-theta) mu + theta Phi(mu) with
// systematic resampling; existence comes from a compactness argument, so
// convergence of this iteration is an empirical result per instance.
EquilibriumReport solve_equilibrium(const GameModel& model, const BrownianEnsemble& W,
                                    std::uint64_t init_seed, const EquilibriumOptions& opts,
                                    const WeightedMeasure& init);

struct StabilityCheck {
    double lhs1 = 0.0, rhs1 = 0.0, slack1 = 0.0, se1 = 0.0;
    double lhs2 = 0.0, rhs2 = 0.0, slack2 = 0.0, se2 = 0.0;
    double c_used = 0.0;
    // cross-measure adjoint identity (both sides and the difference se)
    double identity_lhs = 0.0, identity_rhs = 0.0, identity_se = 0.0;
};

// Evaluates both stability inequalities (and the adjoint cross identity) at
// two saddle states solved on the same ensemble (common random numbers).
StabilityCheck stability_check(const GameModel& model, const SaddleState& s,
                               const SaddleState& s_tilde, const BrownianEnsemble& W);

}  // namespace rmfg
