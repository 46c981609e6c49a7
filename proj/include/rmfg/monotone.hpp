#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rmfg/measure.hpp"
#include "rmfg/model.hpp"

namespace rmfg {

// One draw from a joint law of (q, q', X, X'): positive weights with mean
// close to one and paired state samples.
struct JointSample {
    int dim = 1;
    std::vector<double> q, q2;
    std::vector<double> x, x2;  // [draw][dim]
    int size() const { return static_cast<int>(q.size()); }
};

using JointSampler = std::function<JointSample(std::uint64_t seed, int n_draws)>;

// Catalogue sampler: correlated Gaussians for (X, X'), exponential-martingale
// tilts for (q, q'). zeta = 0 gives unit weights.
JointSampler gaussian_tilt_sampler(int dim, double spread, double shift, double corr,
                                   double zeta, double zeta2);

struct MonotonicityReport {
    double worst_lhs = 0.0;  // worst signed violation of the tested inequality (<= 0 passes)
    double worst_se = 0.0;
    int worst_index = -1;
    std::uint64_t worst_seed = 0;
    int n_samples = 0;
    bool passed = false;
    std::string kind;
};

// Joint flat non-increasing / displacement non-decreasing battery. A pass
// means no counterexample was found over the sampled joint laws; it is a
// refutation search, not a proof.
MonotonicityReport flat_displacement_test(const TerminalCostSpec& g, const JointSampler& sampler,
                                          int n_samples, std::uint64_t seed, int draws_per_law = 4000);

// Specialization q = q' = 1: standard displacement monotonicity (gradient
// form, inequality >= 0).
MonotonicityReport displacement_monotone_test(const TerminalCostSpec& g,
                                              const JointSampler& sampler, int n_samples,
                                              std::uint64_t seed, int draws_per_law = 4000);

// Exact discrete evaluation of the flat anti-monotonicity integral
// on two finite clouds; no Monte Carlo error beyond cloud construction.
double flat_antimonotone_value(const TerminalCostSpec& g, const WeightedMeasure& m,
                               const WeightedMeasure& m_prime);
MonotonicityReport flat_antimonotone_test(const TerminalCostSpec& g,
                                          const std::vector<std::pair<WeightedMeasure, WeightedMeasure>>& pairs);

// Max of the quadratic forms h^T K h over the supplied test vectors and of
// the top eigenvalue of the symmetrized kernel Gram matrix on the points.
// Values <= tolerance support a negative-type verdict on this sample.
double negative_type_test(const KernelSpec& K, const WeightedMeasure& points,
                          const std::vector<std::vector<double>>& h_list);

struct KernelCost {
    KernelSpec kernel;
    TerminalCostSpec::Bump bump = TerminalCostSpec::Bump::Quadratic;
    double lambda = 1.0;
    int r_flag = 0;
    int dim = 1;
};

// Builds the terminal cost bump(x) + integral of K(x, .) d mu after checking
// kernel negativity on a probe sample and bump/r consistency.
TerminalCostSpec build_kernel_cost(const KernelCost& kc, std::uint64_t probe_seed = 99);

}  // namespace rmfg
