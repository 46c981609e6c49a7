#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmfg/mfg.hpp"
#include "rmfg/saddle.hpp"

namespace rmfg {

// Pooled mean-field solution backing the finite game: the product space is
// realized by slicing one big seeded ensemble into disjoint factor streams,
// so lifted strategies are exact copies of the mean-field pair.
struct NPlayerLab {
    GameModel model;
    TerminalCostSpec h;  // Nature's reward cost (may equal model.g)
    BrownianEnsemble W;
    std::uint64_t init_seed = 0;
    SaddleState saddle;
    WeightedMeasure mu_star;
    StatePaths X;
    std::vector<double> ell_path;    // [path][step] running cost under psi*
    std::vector<double> fstar_path;  // [path][step] f*(y*, z*) under q*

    int pool_paths() const { return W.n_paths; }
    int trials(int N) const { return pool_paths() / N; }
    int pool_path(int trial, int player, int N) const { return trial * N + player; }
};

NPlayerLab build_nplayer_lab(const GameModel& model, const TerminalCostSpec& h,
                             const BrownianEnsemble& W, std::uint64_t init_seed,
                             const SaddleState& saddle, const WeightedMeasure& mu_star);

// Single-factor replacement: an alternative control (with its states and
// running costs) or an alternative density for the deviating player.
struct FactorOverride {
    std::string label;
    bool has_control = false;
    ControlField psi;
    StatePaths X;
    std::vector<double> ell_path;
    bool has_density = false;
    DensityProcess q;
    std::vector<double> fstar_path;
    double entropy = 0.0;  // S of the alternative density
};

FactorOverride control_override(const NPlayerLab& lab, const ControlField& psi,
                                const std::string& label);
FactorOverride density_override(const NPlayerLab& lab, const DensityProcess& q,
                                const std::string& label);

struct LiftDiagnostics {
    McValue product_mass;     // E[Q_T^N]
    double ks_statistic = 0;  // two disjoint player slices of X_T
    double ks_p_value = 1.0;
};

// Checks the distributed lift: unit product mass and slice exchangeability.
LiftDiagnostics lift_mean_field_strategy(const NPlayerLab& lab, int N);

// Cost to player i under the product tilt, with the unit-weight empirical
// measure in the terminal coupling.
McValue player_cost(const NPlayerLab& lab, int N, int player,
                    const FactorOverride* deviation = nullptr);

// Nature's reward: sum of all players' h-costs and running costs under the
// product tilt minus gamma times the N-player generalized entropy.
McValue nature_reward(const NPlayerLab& lab, int N, int player = 0,
                      const FactorOverride* deviation = nullptr);

struct PotentialCost {
    ScalarFieldSpec phi;
    double scale = 1.0;
    bool flat_concave = true;  // false flips the sign (hypothesis-violating probe)
    double value(double phi_integral) const {
        const double s = flat_concave ? -1.0 : 1.0;
        return 0.5 * s * scale * phi_integral * phi_integral;
    }
};

// Surrogate reward with the q-weighted empirical measure; the potential
// variant replaces the interaction sum by N G(weighted empirical measure).
McValue surrogate_reward(const NPlayerLab& lab, int N, int player = 0,
                         const FactorOverride* deviation = nullptr,
                         const PotentialCost* potential = nullptr);

// gain = R^i(mean field) - R^i(deviated): positive when deviating helps
McValue player_deviation_gain(const NPlayerLab& lab, int N, int player,
                              const FactorOverride& deviation);

// normalized gain (surrogate(dev) - surrogate(*)) / N, budget-checked
McValue nature_local_deviation_gain(const NPlayerLab& lab, int N, int player,
                                    const FactorOverride& deviation, double entropy_budget);

// all factors deviate; requires the potential form of the surrogate
McValue nature_global_deviation_gain(const NPlayerLab& lab, int N,
                                     const FactorOverride& deviation,
                                     const PotentialCost& potential, double entropy_budget);

// --- deviation catalogue -------------------------------------------------

// Finite-N best response of one player against the frozen others (effective
// terminal cost with the self-atom and the (N-1)/N interaction shrinkage).
FactorOverride best_response_deviation(const NPlayerLab& lab, int N, const SaddleOptions& opts);

FactorOverride zero_control_deviation(const NPlayerLab& lab);
FactorOverride scaled_control_deviation(const NPlayerLab& lab, double scale);
FactorOverride unit_density_deviation(const NPlayerLab& lab);
FactorOverride scaled_tilt_deviation(const NPlayerLab& lab, double scale);
// Gibbs tilt against the finite-N surrogate payoff (kernel interactions)
FactorOverride gibbs_tilt_deviation(const NPlayerLab& lab, int N, const SaddleOptions& opts);

// --- curves ---------------------------------------------------------------

struct DeviationCurve {
    std::string kind;  // player | nature_local | nature_global_potential
    std::vector<int> Ns;
    std::vector<double> gains;  // max over the catalogue at each N
    std::vector<double> ses;
    std::vector<std::string> argmax_labels;
    std::vector<std::uint64_t> seeds;
    double spearman_rho = 0.0;
    double p_value = 1.0;  // exact permutation p for rho <= observed
};

DeviationCurve epsilon_curve(const NPlayerLab& lab, const std::string& kind,
                             const std::vector<int>& Ns, const SaddleOptions& opts,
                             double entropy_budget = 8.0,
                             const PotentialCost* potential = nullptr);

// Spearman rank correlation with an exact permutation p-value (small lists).
void spearman_trend(const std::vector<int>& Ns, const std::vector<double>& gains, double& rho,
                    double& p_value);

// --- tilted law of large numbers -------------------------------------------

struct TiltedLawSpec {
    double mean = 0.0;
    double sd = 1.0;
    double zeta = 0.0;  // Girsanov-type tilt strength; 0 gives the classical LLN
    double corr = 0.6;  // correlation between the tilt factor and the state
};

enum class LlnEstimator {
    TiltedLaw,     // samples X i.i.d. from (qP)_X (exact product-tilt identity)
    NaiveProduct,  // weights each trial by the product of densities
};

// P-tilted probability that the empirical measure of N samples stays
// FM-further than eps from (qP)_X.
McValue tilted_lln_probability(const TiltedLawSpec& law, int N, double eps, int n_trials,
                               std::uint64_t seed, LlnEstimator estimator = LlnEstimator::TiltedLaw,
                               int reference_points = 2000);

// two-sample Kolmogorov-Smirnov on scalar samples
void ks_two_sample(const std::vector<double>& a, const std::vector<double>& b, double& statistic,
                   double& p_value);

}  // namespace rmfg
