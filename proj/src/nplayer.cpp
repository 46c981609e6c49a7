#include "rmfg/nplayer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rmfg/parallel.hpp"
#include "rmfg/rng.hpp"

namespace rmfg {

namespace {

std::vector<double> per_step_running(const GameModel& model, const ControlField& psi,
                                     const StatePaths& X) {
    const int K = X.grid.n_steps;
    std::vector<double> out(static_cast<std::size_t>(X.n_paths) * K);
    parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd pk(X.n);
        for (std::size_t p = begin; p < end; ++p)
            for (int k = 0; k < K; ++k) {
                psi.eval(static_cast<int>(p), k, X.node(static_cast<int>(p), k), pk.data());
                out[p * K + k] = model.ell.value(X.grid.node(k), pk);
            }
    });
    return out;
}

std::vector<double> per_step_fstar(const DriverSpec& driver, const DensityProcess& q) {
    const int K = q.grid.n_steps;
    const NatureControl& nc = q.nature_control;
    std::vector<double> out(static_cast<std::size_t>(q.n_paths) * K);
    parallel_for(q.n_paths, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd z(nc.d);
        for (std::size_t p = begin; p < end; ++p)
            for (int k = 0; k < K; ++k) {
                for (int j = 0; j < nc.d; ++j) z[j] = nc.z(static_cast<int>(p), k)[j];
                const DualValue fs = driver.f_star(q.grid.node(k), nc.y(static_cast<int>(p), k), z);
                if (fs.infinite)
                    throw std::runtime_error("nplayer: infinite f* along a factor density");
                out[p * K + k] = fs.value;
            }
    });
    return out;
}

McValue mean_se_of(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n == 0) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = n > 1 ? var / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

// terminal sums of one trial's empirical measure
struct TrialContext {
    TerminalContext unit;      // unit-weight atoms
    TerminalContext weighted;  // q_T-weighted atoms
};

}  // namespace

NPlayerLab build_nplayer_lab(const GameModel& model, const TerminalCostSpec& h,
                             const BrownianEnsemble& W, std::uint64_t init_seed,
                             const SaddleState& saddle, const WeightedMeasure& mu_star) {
    NPlayerLab lab;
    lab.model = model;
    lab.h = h;
    lab.W = W;
    lab.init_seed = init_seed;
    lab.saddle = saddle;
    lab.mu_star = mu_star;
    lab.X = simulate_state(model.coeffs, saddle.psi, W, init_seed);
    lab.ell_path = per_step_running(model, saddle.psi, lab.X);
    lab.fstar_path = per_step_fstar(model.driver, saddle.q);
    for (double y : saddle.q.nature_control.y_star)
        if (y != 0.0)
            throw std::invalid_argument(
                "nplayer: factor densities must be Doleans-Dade exponentials (Y* = 0)");
    return lab;
}

FactorOverride control_override(const NPlayerLab& lab, const ControlField& psi,
                                const std::string& label) {
    FactorOverride dev;
    dev.label = label;
    dev.has_control = true;
    dev.psi = psi;
    dev.X = simulate_state(lab.model.coeffs, psi, lab.W, lab.init_seed);
    dev.ell_path = per_step_running(lab.model, psi, dev.X);
    return dev;
}

FactorOverride density_override(const NPlayerLab& lab, const DensityProcess& q,
                                const std::string& label) {
    FactorOverride dev;
    dev.label = label;
    dev.has_density = true;
    dev.q = q;
    dev.fstar_path = per_step_fstar(lab.model.driver, q);
    dev.entropy = generalized_entropy(q, lab.model.driver).mean;
    return dev;
}

namespace {

// Accumulates one trial's terminal contexts; `dev_player` substitutes the
// override's states/densities on that factor.
TrialContext trial_context(const NPlayerLab& lab, int N, int trial, int dev_player,
                           const FactorOverride* dev) {
    TrialContext ctx;
    const int K = lab.X.grid.n_steps;
    const TerminalCostSpec& g = lab.h;  // interaction structure shared by g and h catalogues
    Eigen::VectorXd mean_u = Eigen::VectorXd::Zero(lab.X.n), mean_w = Eigen::VectorXd::Zero(lab.X.n);
    double mass_w = 0.0, phi_u = 0.0, phi_w = 0.0, psi_u = 0.0, psi_w = 0.0;
    for (int j = 0; j < N; ++j) {
        const int path = lab.pool_path(trial, j, N);
        const bool is_dev = dev != nullptr && j == dev_player;
        const double* x = (is_dev && dev->has_control) ? dev->X.node(path, K)
                                                       : lab.X.node(path, K);
        const double qT = (is_dev && dev->has_density) ? dev->q.terminal(path)
                                                       : lab.saddle.q.terminal(path);
        for (int c = 0; c < lab.X.n; ++c) {
            mean_u[c] += x[c] / N;
            mean_w[c] += qT * x[c] / N;
        }
        mass_w += qT / N;
        if (g.kind == TerminalCostSpec::Kind::Kernel) {
            const double pv = g.kernel.phi.value(x, lab.X.n);
            phi_u += pv / N;
            phi_w += qT * pv / N;
            if (g.kernel.kind == KernelSpec::Kind::Antisym) {
                const double sv = g.kernel.psi.value(x, lab.X.n);
                psi_u += sv / N;
                psi_w += qT * sv / N;
            }
        }
    }
    ctx.unit.mass = 1.0;
    ctx.unit.mean = mean_u;
    ctx.unit.phi_integral = phi_u;
    ctx.unit.psi_integral = psi_u;
    ctx.weighted.mass = mass_w;
    ctx.weighted.mean = mass_w > 0 ? Eigen::VectorXd(mean_w / mass_w) : mean_u;
    ctx.weighted.phi_integral = phi_w;
    ctx.weighted.psi_integral = psi_w;
    return ctx;
}

// per-trial evaluation loop with deterministic aggregation
template <class F>
std::vector<double> over_trials(const NPlayerLab& lab, int N, F&& per_trial) {
    const int T = lab.trials(N);
    if (T < 2) throw std::invalid_argument("nplayer: pool too small for N");
    std::vector<double> values(T);
    parallel_for(T, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) values[t] = per_trial(static_cast<int>(t));
    });
    return values;
}

std::vector<double> player_cost_trials(const NPlayerLab& lab, int N, int player,
                                       const FactorOverride* dev) {
    const int K = lab.X.grid.n_steps;
    const double dt = lab.X.grid.dt();
    const double gamma_unused = lab.model.gamma;
    (void)gamma_unused;
    return over_trials(lab, N, [&](int t) {
        const TrialContext ctx = trial_context(lab, N, t, player, dev);
        const int path_i = lab.pool_path(t, player, N);
        const bool dev_ctrl = dev != nullptr && dev->has_control;
        const bool dev_dens = dev != nullptr && dev->has_density;
        const double* xi = dev_ctrl ? dev->X.node(path_i, K) : lab.X.node(path_i, K);
        // log product density at the terminal node and per step
        double run = 0.0;
        for (int k = 0; k <= K; ++k) {
            double lnQ = 0.0;
            for (int j = 0; j < N; ++j) {
                const int path = lab.pool_path(t, j, N);
                lnQ += (dev_dens && j == player) ? dev->q.log_at(path, k)
                                                 : lab.saddle.q.log_at(path, k);
            }
            if (k == K) {
                const double gi = lab.model.g.value(xi, ctx.unit);
                return run + std::exp(lnQ) * gi;
            }
            const double elli = dev_ctrl ? dev->ell_path[static_cast<std::size_t>(path_i) * K + k]
                                         : lab.ell_path[static_cast<std::size_t>(path_i) * K + k];
            run += std::exp(lnQ) * elli * dt;
        }
        return run;  // unreachable
    });
}

std::vector<double> nature_reward_trials(const NPlayerLab& lab, int N, int player,
                                         const FactorOverride* dev) {
    const int K = lab.X.grid.n_steps;
    const double dt = lab.X.grid.dt();
    const double gamma = lab.model.gamma;
    return over_trials(lab, N, [&](int t) {
        const TrialContext ctx = trial_context(lab, N, t, player, dev);
        double acc = 0.0;
        for (int k = 0; k <= K; ++k) {
            double lnQ = 0.0, runsum = 0.0, fsum = 0.0;
            for (int j = 0; j < N; ++j) {
                const int path = lab.pool_path(t, j, N);
                const bool is_dev = dev != nullptr && j == player;
                lnQ += (is_dev && dev->has_density) ? dev->q.log_at(path, k)
                                                    : lab.saddle.q.log_at(path, k);
                if (k < K) {
                    runsum += (is_dev && dev->has_control)
                                  ? dev->ell_path[static_cast<std::size_t>(path) * K + k]
                                  : lab.ell_path[static_cast<std::size_t>(path) * K + k];
                    fsum += (is_dev && dev->has_density)
                                ? dev->fstar_path[static_cast<std::size_t>(path) * K + k]
                                : lab.fstar_path[static_cast<std::size_t>(path) * K + k];
                }
            }
            if (k == K) {
                double hsum = 0.0;
                for (int j = 0; j < N; ++j) {
                    const int path = lab.pool_path(t, j, N);
                    const bool is_dev = dev != nullptr && j == player;
                    const double* x = (is_dev && dev->has_control) ? dev->X.node(path, K)
                                                                   : lab.X.node(path, K);
                    hsum += lab.h.value(x, ctx.unit);
                }
                acc += std::exp(lnQ) * hsum;
            } else {
                acc += std::exp(lnQ) * (runsum - gamma * fsum) * dt;
            }
        }
        return acc;
    });
}

std::vector<double> surrogate_trials(const NPlayerLab& lab, int N, int player,
                                     const FactorOverride* dev, const PotentialCost* potential,
                                     bool dev_all_factors = false) {
    const int K = lab.X.grid.n_steps;
    const double dt = lab.X.grid.dt();
    const double gamma = lab.model.gamma;
    const TerminalContext empty_ctx{0.0, Eigen::VectorXd::Zero(lab.X.n), 0.0, 0.0};
    return over_trials(lab, N, [&](int t) {
        // weighted empirical context; in the all-factor case every player uses
        // the override density
        TerminalContext wctx;
        {
            Eigen::VectorXd mean_w = Eigen::VectorXd::Zero(lab.X.n);
            double mass_w = 0.0, phi_w = 0.0, psi_w = 0.0;
            for (int j = 0; j < N; ++j) {
                const int path = lab.pool_path(t, j, N);
                const bool is_dev = dev != nullptr && (dev_all_factors || j == player);
                const double* x = (is_dev && dev->has_control) ? dev->X.node(path, K)
                                                               : lab.X.node(path, K);
                const double qT = (is_dev && dev->has_density) ? dev->q.terminal(path)
                                                               : lab.saddle.q.terminal(path);
                for (int c = 0; c < lab.X.n; ++c) mean_w[c] += qT * x[c] / N;
                mass_w += qT / N;
                if (lab.h.kind == TerminalCostSpec::Kind::Kernel) {
                    phi_w += qT * lab.h.kernel.phi.value(x, lab.X.n) / N;
                    if (lab.h.kernel.kind == KernelSpec::Kind::Antisym)
                        psi_w += qT * lab.h.kernel.psi.value(x, lab.X.n) / N;
                }
            }
            wctx.mass = mass_w;
            wctx.mean = mass_w > 0 ? Eigen::VectorXd(mean_w / mass_w)
                                   : Eigen::VectorXd::Zero(lab.X.n);
            wctx.phi_integral = phi_w;
            wctx.psi_integral = psi_w;
        }
        double acc = 0.0;
        for (int j = 0; j < N; ++j) {
            const int path = lab.pool_path(t, j, N);
            const bool is_dev = dev != nullptr && (dev_all_factors || j == player);
            const double* x = (is_dev && dev->has_control) ? dev->X.node(path, K)
                                                           : lab.X.node(path, K);
            const double qT = (is_dev && dev->has_density) ? dev->q.terminal(path)
                                                           : lab.saddle.q.terminal(path);
            if (potential != nullptr) {
                acc += qT * lab.h.value(x, empty_ctx);  // x-only part g0
            } else {
                acc += qT * lab.h.value(x, wctx);
            }
            for (int k = 0; k < K; ++k) {
                const double qk = (is_dev && dev->has_density) ? dev->q.q(path, k)
                                                               : lab.saddle.q.q(path, k);
                const double ell = (is_dev && dev->has_control)
                                       ? dev->ell_path[static_cast<std::size_t>(path) * K + k]
                                       : lab.ell_path[static_cast<std::size_t>(path) * K + k];
                const double fs = (is_dev && dev->has_density)
                                      ? dev->fstar_path[static_cast<std::size_t>(path) * K + k]
                                      : lab.fstar_path[static_cast<std::size_t>(path) * K + k];
                acc += qk * (ell - gamma * fs) * dt;
            }
        }
        if (potential != nullptr) acc += N * potential->value(wctx.phi_integral);
        return acc;
    });
}

}  // namespace

LiftDiagnostics lift_mean_field_strategy(const NPlayerLab& lab, int N) {
    LiftDiagnostics out;
    const int K = lab.X.grid.n_steps;
    const std::vector<double> mass = over_trials(lab, N, [&](int t) {
        double lnQ = 0.0;
        for (int j = 0; j < N; ++j) lnQ += lab.saddle.q.log_at(lab.pool_path(t, j, N), K);
        return std::exp(lnQ);
    });
    out.product_mass = mean_se_of(mass);
    // exchangeability: terminal states of two disjoint player slices
    const int T = lab.trials(N);
    std::vector<double> slice0(T), slice1(T);
    for (int t = 0; t < T; ++t) {
        slice0[t] = lab.X.node(lab.pool_path(t, 0, N), K)[0];
        slice1[t] = lab.X.node(lab.pool_path(t, std::min(1, N - 1), N), K)[0];
    }
    ks_two_sample(slice0, slice1, out.ks_statistic, out.ks_p_value);
    return out;
}

McValue player_cost(const NPlayerLab& lab, int N, int player, const FactorOverride* deviation) {
    return mean_se_of(player_cost_trials(lab, N, player, deviation));
}

McValue nature_reward(const NPlayerLab& lab, int N, int player, const FactorOverride* deviation) {
    return mean_se_of(nature_reward_trials(lab, N, player, deviation));
}

McValue surrogate_reward(const NPlayerLab& lab, int N, int player, const FactorOverride* deviation,
                         const PotentialCost* potential) {
    return mean_se_of(surrogate_trials(lab, N, player, deviation, potential));
}

McValue player_deviation_gain(const NPlayerLab& lab, int N, int player,
                              const FactorOverride& deviation) {
    const std::vector<double> base = player_cost_trials(lab, N, player, nullptr);
    const std::vector<double> dev = player_cost_trials(lab, N, player, &deviation);
    std::vector<double> diff(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) diff[i] = base[i] - dev[i];
    return mean_se_of(diff);
}

McValue nature_local_deviation_gain(const NPlayerLab& lab, int N, int player,
                                    const FactorOverride& deviation, double entropy_budget) {
    if (!deviation.has_density)
        throw std::invalid_argument("nature_local_deviation_gain: density override required");
    if (deviation.entropy > entropy_budget)
        throw std::invalid_argument("nature_local_deviation_gain: entropy budget exceeded");
    const std::vector<double> base = surrogate_trials(lab, N, player, nullptr, nullptr);
    const std::vector<double> dev = surrogate_trials(lab, N, player, &deviation, nullptr);
    std::vector<double> diff(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) diff[i] = (dev[i] - base[i]) / N;
    return mean_se_of(diff);
}

McValue nature_global_deviation_gain(const NPlayerLab& lab, int N,
                                     const FactorOverride& deviation,
                                     const PotentialCost& potential, double entropy_budget) {
    if (!deviation.has_density)
        throw std::invalid_argument("nature_global_deviation_gain: density override required");
    if (deviation.entropy > entropy_budget)
        throw std::invalid_argument("nature_global_deviation_gain: entropy budget exceeded");
    if (lab.h.kind != TerminalCostSpec::Kind::Kernel)
        throw std::invalid_argument(
            "nature_global_deviation_gain: potential form requires a kernel interaction");
    const std::vector<double> base = surrogate_trials(lab, N, 0, nullptr, &potential, true);
    const std::vector<double> dev = surrogate_trials(lab, N, 0, &deviation, &potential, true);
    std::vector<double> diff(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) diff[i] = (dev[i] - base[i]) / N;
    return mean_se_of(diff);
}

FactorOverride zero_control_deviation(const NPlayerLab& lab) {
    return control_override(
        lab, ControlField::zero(lab.pool_paths(), lab.X.grid.n_steps, lab.X.n), "zero_control");
}

FactorOverride scaled_control_deviation(const NPlayerLab& lab, double scale) {
    ControlField psi = lab.saddle.psi;
    for (double& v : psi.values) v *= scale;
    return control_override(lab, psi, "scaled_control_" + std::to_string(scale));
}

FactorOverride unit_density_deviation(const NPlayerLab& lab) {
    FactorOverride dev = density_override(
        lab, DensityProcess::unit(lab.X.grid, lab.pool_paths(), lab.W.d), "unit_density");
    return dev;
}

FactorOverride scaled_tilt_deviation(const NPlayerLab& lab, double scale) {
    NatureControl nc = lab.saddle.q.nature_control;
    for (double& v : nc.z_star) v *= scale;
    return density_override(lab, simulate_density(nc, lab.W),
                            "scaled_tilt_" + std::to_string(scale));
}

namespace {

// effective terminal cost seen by one player among N (self atom plus the
// (N-1)/N interaction shrinkage)
void finite_n_effective_cost(const NPlayerLab& lab, int N, double interaction_factor,
                             TerminalCostSpec& g_eff, WeightedMeasure& mu_eff) {
    const TerminalCostSpec& g = lab.model.g;
    if (g.kind == TerminalCostSpec::Kind::Kernel) {
        g_eff = g;
        g_eff.self_weight = 1.0 / N;
        mu_eff = lab.mu_star;
        for (double& w : mu_eff.weights) w *= interaction_factor;
    } else if (g.kind == TerminalCostSpec::Kind::Quadratic && g.kappa != 0.0) {
        const double a = 1.0 - g.kappa / N;
        const double mbar = (lab.mu_star.total_mass() > 0
                                 ? lab.mu_star.moment_sum()[0] / lab.mu_star.total_mass()
                                 : 0.0);
        const double center = g.kappa * (N - 1.0) * mbar / (N * a);
        g_eff = g;
        g_eff.lambda = g.lambda * a * a;
        g_eff.kappa = 1.0;
        mu_eff = WeightedMeasure::dirac(Eigen::VectorXd::Constant(g.dim, center));
    } else {
        g_eff = g;
        mu_eff = lab.mu_star;
    }
}

}  // namespace

FactorOverride best_response_deviation(const NPlayerLab& lab, int N, const SaddleOptions& opts) {
    TerminalCostSpec g_eff;
    WeightedMeasure mu_eff;
    finite_n_effective_cost(lab, N, (N - 1.0) / N, g_eff, mu_eff);
    GameModel model_eff = lab.model;
    model_eff.g = g_eff;
    BestResponseDiag diag;
    const ControlField psi = player_best_response(model_eff, mu_eff, lab.saddle.q, lab.W,
                                                  lab.init_seed, lab.saddle.psi, opts, &diag);
    FactorOverride dev = control_override(lab, psi, "best_response");
    return dev;
}

FactorOverride gibbs_tilt_deviation(const NPlayerLab& lab, int N, const SaddleOptions& opts) {
    // Gibbs best response to the finite-N surrogate payoff: for kernel
    // interactions the cross term with the other N-1 factors rescales the
    // interaction integral to (2N-1)/N.
    GameModel model_eff = lab.model;
    WeightedMeasure mu_eff = lab.mu_star;
    if (lab.h.kind == TerminalCostSpec::Kind::Kernel) {
        model_eff.g = lab.h;
        model_eff.g.self_weight = 1.0 / N;
        for (double& w : mu_eff.weights) w *= (2.0 * N - 1.0) / N;
    } else {
        model_eff.g = lab.h;
    }
    const NatureResponse nr =
        nature_best_response(model_eff, mu_eff, lab.saddle.psi, lab.X, lab.W, opts);
    return density_override(lab, nr.q, "gibbs_tilt");
}

DeviationCurve epsilon_curve(const NPlayerLab& lab, const std::string& kind,
                             const std::vector<int>& Ns, const SaddleOptions& opts,
                             double entropy_budget, const PotentialCost* potential) {
    DeviationCurve curve;
    curve.kind = kind;
    curve.Ns = Ns;
    for (std::size_t i = 1; i < Ns.size(); ++i)
        if (Ns[i] <= Ns[i - 1]) throw std::invalid_argument("epsilon_curve: Ns must increase");
    for (int N : Ns) {
        double best = -1e300, best_se = 0.0;
        std::string best_label;
        if (kind == "player") {
            std::vector<FactorOverride> cat;
            cat.push_back(zero_control_deviation(lab));
            cat.push_back(scaled_control_deviation(lab, 0.5));
            cat.push_back(scaled_control_deviation(lab, 1.5));
            cat.push_back(best_response_deviation(lab, N, opts));
            for (const auto& dev : cat) {
                const McValue g = player_deviation_gain(lab, N, 0, dev);
                if (g.mean > best) {
                    best = g.mean;
                    best_se = g.se;
                    best_label = dev.label;
                }
            }
        } else if (kind == "nature_local") {
            std::vector<FactorOverride> cat;
            cat.push_back(unit_density_deviation(lab));
            cat.push_back(scaled_tilt_deviation(lab, 0.5));
            cat.push_back(scaled_tilt_deviation(lab, 1.5));
            cat.push_back(gibbs_tilt_deviation(lab, N, opts));
            for (const auto& dev : cat) {
                if (dev.entropy > entropy_budget) continue;
                const McValue g = nature_local_deviation_gain(lab, N, 0, dev, entropy_budget);
                if (g.mean > best) {
                    best = g.mean;
                    best_se = g.se;
                    best_label = dev.label;
                }
            }
        } else if (kind == "nature_global_potential") {
            if (potential == nullptr)
                throw std::invalid_argument("epsilon_curve: potential required for this kind");
            std::vector<FactorOverride> cat;
            cat.push_back(unit_density_deviation(lab));
            cat.push_back(scaled_tilt_deviation(lab, 0.5));
            cat.push_back(scaled_tilt_deviation(lab, 1.5));
            for (const auto& dev : cat) {
                if (dev.entropy > entropy_budget) continue;
                const McValue g =
                    nature_global_deviation_gain(lab, N, dev, *potential, entropy_budget);
                if (g.mean > best) {
                    best = g.mean;
                    best_se = g.se;
                    best_label = dev.label;
                }
            }
        } else {
            throw std::invalid_argument("epsilon_curve: unknown kind " + kind);
        }
        curve.gains.push_back(best);
        curve.ses.push_back(best_se);
        curve.argmax_labels.push_back(best_label);
        curve.seeds.push_back(lab.W.seed);
    }
    spearman_trend(curve.Ns, curve.gains, curve.spearman_rho, curve.p_value);
    return curve;
}

void spearman_trend(const std::vector<int>& Ns, const std::vector<double>& gains, double& rho,
                    double& p_value) {
    const int n = static_cast<int>(Ns.size());
    auto ranks_of = [n](const std::vector<double>& v) {
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        for (int i = 0; i < n; ++i) r[idx[i]] = i + 1.0;
        return r;
    };
    std::vector<double> nv(Ns.begin(), Ns.end());
    const std::vector<double> rn = ranks_of(nv);
    auto rho_of = [&](const std::vector<double>& g) {
        const std::vector<double> rg = ranks_of(g);
        double mr = 0.0;
        for (int i = 0; i < n; ++i) mr += rn[i];
        mr /= n;
        double num = 0.0, da = 0.0, db = 0.0;
        for (int i = 0; i < n; ++i) {
            num += (rn[i] - mr) * (rg[i] - mr);
            da += (rn[i] - mr) * (rn[i] - mr);
            db += (rg[i] - mr) * (rg[i] - mr);
        }
        return da > 0 && db > 0 ? num / std::sqrt(da * db) : 0.0;
    };
    rho = rho_of(gains);
    // exact permutation test for rho <= observed
    std::vector<double> perm(gains);
    std::sort(perm.begin(), perm.end());
    int count = 0, total = 0;
    do {
        ++total;
        if (rho_of(perm) <= rho + 1e-12) ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    p_value = static_cast<double>(count) / total;
}

namespace {

double normal_quantile(double p) {
    // Newton on the standard normal CDF from a logistic start
    double x = -std::log(1.0 / p - 1.0) / 1.702;
    for (int it = 0; it < 40; ++it) {
        const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
        if (pdf < 1e-300) break;
        const double step = (cdf - p) / pdf;
        x -= step;
        if (std::abs(step) < 1e-12) break;
    }
    return x;
}

}  // namespace

McValue tilted_lln_probability(const TiltedLawSpec& law, int N, double eps, int n_trials,
                               std::uint64_t seed, LlnEstimator estimator, int reference_points) {
    // mass(empirical) = mass(reference) = 1, so FM never exceeds 2
    if (eps >= 2.0) return {0.0, 0.0};
    // Under q P the state is Gaussian with mean shifted by sd * zeta * corr;
    // the reference measure (qP)_X is laid out as an equal-mass quantile grid.
    const double tilted_mean = law.mean + law.sd * law.zeta * law.corr;
    WeightedMeasure ref;
    ref.dim = 1;
    for (int i = 0; i < reference_points; ++i) {
        ref.points.push_back(tilted_mean +
                             law.sd * normal_quantile((i + 0.5) / reference_points));
        ref.weights.push_back(1.0 / reference_points);
    }
    std::vector<double> vals(n_trials);
    parallel_for(n_trials, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            StreamRng rng(seed, t);
            WeightedMeasure emp;
            emp.dim = 1;
            emp.weights.assign(N, 1.0 / N);
            double logw = 0.0;
            for (int i = 0; i < N; ++i) {
                const double g1 = rng.normal();
                if (estimator == LlnEstimator::TiltedLaw) {
                    emp.points.push_back(tilted_mean + law.sd * g1);
                } else {
                    const double g2 = rng.normal();
                    emp.points.push_back(law.mean + law.sd * g1);
                    const double gq =
                        law.corr * g1 + std::sqrt(1.0 - law.corr * law.corr) * g2;
                    logw += law.zeta * gq - 0.5 * law.zeta * law.zeta;
                }
            }
            std::sort(emp.points.begin(), emp.points.end());
            const double d = fm_distance(emp, ref).value;
            const double w = estimator == LlnEstimator::TiltedLaw ? 1.0 : std::exp(logw);
            vals[t] = d > eps ? w : 0.0;
        }
    });
    return mean_se_of(vals);
}

void ks_two_sample(const std::vector<double>& a, const std::vector<double>& b, double& statistic,
                   double& p_value) {
    std::vector<double> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const std::size_t n1 = sa.size(), n2 = sb.size();
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < n1 && j < n2) {
        const double x = std::min(sa[i], sb[j]);
        while (i < n1 && sa[i] <= x) ++i;
        while (j < n2 && sb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
    }
    statistic = d;
    const double ne = std::sqrt(static_cast<double>(n1) * n2 / (n1 + n2));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k)
        sum += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p_value = std::clamp(sum, 0.0, 1.0);
}

}  // namespace rmfg
