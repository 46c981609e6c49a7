#include "rmfg/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rmfg/parallel.hpp"

namespace rmfg {

namespace {

std::vector<double> terminal_costs(const GameModel& model, const TerminalContext& ctx,
                                   const StatePaths& X) {
    std::vector<double> g(X.n_paths);
    parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p)
            g[p] = model.g.value(X.node(static_cast<int>(p), X.grid.n_steps), ctx);
    });
    return g;
}

std::vector<double> running_integrals(const GameModel& model, const ControlField& psi,
                                      const StatePaths& X) {
    const int K = X.grid.n_steps;
    const double dt = X.grid.dt();
    std::vector<double> out(X.n_paths);
    parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd pk(X.n);
        for (std::size_t p = begin; p < end; ++p) {
            double acc = 0.0;
            for (int k = 0; k < K; ++k) {
                psi.eval(static_cast<int>(p), k, X.node(static_cast<int>(p), k), pk.data());
                acc += model.ell.value(X.grid.node(k), pk) * dt;
            }
            out[p] = acc;
        }
    });
    return out;
}

McValue mean_se(const std::vector<double>& v) {
    const std::size_t n = v.size();
    double mean = deterministic_sum(n, [&](std::size_t i) { return v[i]; }) / n;
    double var = deterministic_sum(n, [&](std::size_t i) {
                     const double d = v[i] - mean;
                     return d * d;
                 }) /
                 (n > 1 ? n - 1.0 : 1.0);
    return {mean, std::sqrt(var / n)};
}

// gamma * ln mean exp(C/gamma) with a delta-method standard error
void gibbs_log_mean(const std::vector<double>& C, double gamma, double& value, double& se,
                    double& max_expo) {
    const std::size_t n = C.size();
    double m = C[0] / gamma;
    for (double c : C) m = std::max(m, c / gamma);
    max_expo = m;
    double mean_w = 0.0;
    for (double c : C) mean_w += std::exp(c / gamma - m);
    mean_w /= n;
    double var_w = 0.0;
    for (double c : C) {
        const double d = std::exp(c / gamma - m) - mean_w;
        var_w += d * d;
    }
    var_w = n > 1 ? var_w / (n - 1.0) : 0.0;
    value = gamma * (m + std::log(mean_w));
    se = gamma * std::sqrt(var_w / n) / mean_w;
}

struct GradientField {
    std::vector<double> g;  // [path][step][n]
    double weighted_norm = 0.0;
};

GradientField control_gradient(const GameModel& model, const ControlField& psi,
                               const DensityProcess& q, const AdjointSolution& adj,
                               const StatePaths& X) {
    const int K = X.grid.n_steps;
    const int n = X.n;
    const double dt = X.grid.dt();
    GradientField out;
    out.g.resize(static_cast<std::size_t>(X.n_paths) * K * n);
    std::vector<Eigen::MatrixXd> cT(K);
    for (int k = 0; k < K; ++k) cT[k] = model.coeffs.c.eval(X.grid.node(k)).transpose();
    const bool with_k = model.coeffs.r_flag == 1 && adj.k_computed;
    const std::size_t n_chunks =
        (static_cast<std::size_t>(X.n_paths) + kParallelChunk - 1) / kParallelChunk;
    std::vector<double> chunk_norm(n_chunks, 0.0);
    parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
        const std::size_t c = begin / kParallelChunk;
        Eigen::VectorXd psi_k(n), grad(n), pvec(n);
        double acc = 0.0;
        for (std::size_t p = begin; p < end; ++p) {
            const int pi = static_cast<int>(p);
            for (int k = 0; k < K; ++k) {
                psi.eval(pi, k, X.node(pi, k), psi_k.data());
                const double qk = q.q(pi, k);
                const double* padj = adj.p_at(pi, k);
                for (int i = 0; i < n; ++i) pvec[i] = padj[i];
                grad = qk * model.ell.grad(X.grid.node(k), psi_k) + cT[k] * pvec;
                if (with_k) {
                    const double* kmat = adj.k_at(pi, k);
                    for (int l = 0; l < n; ++l) {
                        double tr = 0.0;
                        for (int i = 0; i < n; ++i)
                            for (int j = 0; j < adj.d; ++j)
                                tr += model.coeffs.sigma_entry(i, j, l) * kmat[i * adj.d + j];
                        grad[l] += tr;
                    }
                }
                double g2 = 0.0;
                for (int i = 0; i < n; ++i) {
                    out.g[(p * static_cast<std::size_t>(K) + k) * n + i] = grad[i];
                    g2 += grad[i] * grad[i];
                }
                acc += qk * g2 * dt;
            }
        }
        chunk_norm[c] += acc;
    });
    double total = 0.0;
    for (double v : chunk_norm) total += v;
    out.weighted_norm = std::sqrt(total / X.n_paths);
    return out;
}

std::vector<double> terminal_gradients(const GameModel& model, const TerminalContext& ctx,
                                       const StatePaths& X, const DensityProcess& q) {
    std::vector<double> tg(static_cast<std::size_t>(X.n_paths) * X.n);
    parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> grad(X.n);
        for (std::size_t p = begin; p < end; ++p) {
            const int pi = static_cast<int>(p);
            model.g.grad_x(X.node(pi, X.grid.n_steps), ctx, grad.data());
            const double qT = q.terminal(pi);
            for (int i = 0; i < X.n; ++i) tg[p * static_cast<std::size_t>(X.n) + i] = qT * grad[i];
        }
    });
    return tg;
}

}  // namespace

CostBreakdown cost_functional(const GameModel& model, const WeightedMeasure& mu,
                              const ControlField& psi, const DensityProcess& q,
                              const StatePaths& X) {
    const TerminalContext ctx = model.g.context(mu);
    const int K = X.grid.n_steps;
    const double dt = X.grid.dt();
    const NatureControl& nc = q.nature_control;
    std::vector<double> per_path(X.n_paths);
    std::vector<double> term(X.n_paths), run(X.n_paths), entr(X.n_paths);
    std::vector<char> infinite(X.n_paths, 0);
    parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd psi_k(X.n), z(nc.d);
        for (std::size_t p = begin; p < end; ++p) {
            const int pi = static_cast<int>(p);
            term[p] = q.terminal(pi) * model.g.value(X.node(pi, K), ctx);
            double racc = 0.0, eacc = 0.0;
            for (int k = 0; k < K; ++k) {
                const double qbar = 0.5 * (q.q(pi, k) + q.q(pi, k + 1));
                psi.eval(pi, k, X.node(pi, k), psi_k.data());
                racc += qbar * model.ell.value(X.grid.node(k), psi_k) * dt;
                for (int j = 0; j < nc.d; ++j) z[j] = nc.z(pi, k)[j];
                const DualValue fs = model.driver.f_star(X.grid.node(k), nc.y(pi, k), z);
                if (fs.infinite) {
                    infinite[p] = 1;
                    break;
                }
                eacc += qbar * fs.value * dt;
            }
            run[p] = racc;
            entr[p] = eacc;
            per_path[p] = term[p] + racc - model.gamma * eacc;
        }
    });
    for (int p = 0; p < X.n_paths; ++p)
        if (infinite[p]) throw std::runtime_error("cost_functional: entropy integrand infinite");
    CostBreakdown out;
    out.terminal = mean_se(term).mean;
    out.running = mean_se(run).mean;
    out.entropy = mean_se(entr).mean;
    const McValue j = mean_se(per_path);
    out.J = j.mean;
    out.se = j.se;
    return out;
}

NatureResponse nature_best_response(const GameModel& model, const WeightedMeasure& mu,
                                    const ControlField& psi, const StatePaths& X,
                                    const BrownianEnsemble& W, const SaddleOptions& opts) {
    const TerminalContext ctx = model.g.context(mu);
    const std::vector<double> terminal = terminal_costs(model, ctx, X);
    const DriverSpec scaled = model.driver.scaled(model.gamma);

    NatureResponse out;
    out.value = solve_value_bsde(X, psi, terminal, scaled, model.ell, opts.value_basis,
                                 opts.picard_iters, W, nullptr, opts.picard_tol);
    out.q = simulate_density(
        nature_control_from_value(scaled, out.value, X.grid, &out.clip_count), W);

    const CostBreakdown cost = cost_functional(model, mu, psi, out.q, X);
    out.sup_value = cost.J;
    out.sup_value_se = cost.se;

    if (model.driver.is_quadratic()) {
        // closed Gibbs route: terminal tilt proportional to exp(C_T / gamma)
        const std::vector<double> run = running_integrals(model, psi, X);
        std::vector<double> C(X.n_paths);
        for (int p = 0; p < X.n_paths; ++p) C[p] = terminal[p] + run[p];
        gibbs_log_mean(C, model.gamma, out.gibbs_value, out.gibbs_se, out.max_exponent);
        if (out.max_exponent > 500.0)
            throw std::runtime_error("nature_best_response: Gibbs exponent overflow, max " +
                                     std::to_string(out.max_exponent));
        const double lognorm = out.gibbs_value / model.gamma;
        double mism = 0.0;
        for (int p = 0; p < X.n_paths; ++p)
            mism += std::abs(out.q.terminal(p) - std::exp(C[p] / model.gamma - lognorm));
        out.route_mismatch = mism / X.n_paths;
    }
    return out;
}

ControlField player_best_response(const GameModel& model, const WeightedMeasure& mu,
                                  const DensityProcess& q, const BrownianEnsemble& W,
                                  std::uint64_t init_seed, const ControlField& start,
                                  const SaddleOptions& opts, BestResponseDiag* diag) {
    const TerminalContext ctx = model.g.context(mu);
    StatePaths X = simulate_state(model.coeffs, start, W, init_seed);
    ControlField psi = materialize(start, X);
    const int K = W.grid.n_steps;
    const int n = model.coeffs.state_dim;
    const bool need_k = model.coeffs.r_flag == 1;

    CostBreakdown cost = cost_functional(model, mu, psi, q, X);
    BestResponseDiag local;
    double step = opts.br_step;
    for (int it = 1; it <= opts.br_max_iters; ++it) {
        const std::vector<double> tg = terminal_gradients(model, ctx, X, q);
        const AdjointSolution adj =
            solve_adjoint_bsde(X, q, model.coeffs, tg, opts.adjoint_basis, W, need_k);
        const GradientField grad = control_gradient(model, psi, q, adj, X);
        local.grad_norm = grad.weighted_norm;
        local.iterations = it;
        if (grad.weighted_norm < opts.br_tol) {
            local.converged = true;
            break;
        }
        bool accepted = false;
        for (int ls = 0; ls < 30 && !accepted; ++ls) {
            ControlField trial = psi;
            parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
                for (std::size_t p = begin; p < end; ++p)
                    for (int k = 0; k < K; ++k)
                        for (int i = 0; i < n; ++i)
                            trial.value_at(static_cast<int>(p), k)[i] -=
                                step * grad.g[(p * static_cast<std::size_t>(K) + k) * n + i];
            });
            StatePaths Xt = simulate_state(model.coeffs, trial, W, init_seed);
            const CostBreakdown trial_cost = cost_functional(model, mu, trial, q, Xt);
            const double armijo = 1e-4 * step * grad.weighted_norm * grad.weighted_norm;
            if (trial_cost.J <= cost.J - armijo) {
                psi = std::move(trial);
                X = std::move(Xt);
                cost = trial_cost;
                accepted = true;
                step = std::min(step * 1.5, 4.0 * opts.br_step);
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) {
            local.line_search_failed = true;
            break;
        }
    }
    if (diag != nullptr) *diag = local;
    return psi;
}

SaddleState solve_saddle(const GameModel& model, const WeightedMeasure& mu,
                         const BrownianEnsemble& W, std::uint64_t init_seed,
                         const SaddleOptions& opts, const ControlField* warm_start) {
    SaddleState s;
    s.mu = mu;
    s.brownian_seed = W.seed;
    s.init_seed = init_seed;
    const int n = model.coeffs.state_dim;

    ControlField psi = warm_start != nullptr ? *warm_start
                                             : ControlField::zero(W.n_paths, W.grid.n_steps, n);
    StatePaths X = simulate_state(model.coeffs, psi, W, init_seed);
    psi = materialize(psi, X);
    NatureResponse nature = nature_best_response(model, mu, psi, X, W, opts);

    double theta = opts.damping;
    double prev_J = nature.sup_value;
    double prev_dJ = 0.0;
    s.J_history.push_back(prev_J);
    bool converged = false;
    BestResponseDiag br;
    int it;
    for (it = 1; it <= opts.max_outer; ++it) {
        const ControlField psi_br =
            player_best_response(model, mu, nature.q, W, init_seed, psi, opts, &br);
        ControlField psi_new = psi;
        for (std::size_t i = 0; i < psi_new.values.size(); ++i)
            psi_new.values[i] = (1.0 - theta) * psi.values[i] + theta * psi_br.values[i];
        const double dpsi = psi_new.l2_distance(psi) / (1.0 + psi.l2_norm());
        X = simulate_state(model.coeffs, psi_new, W, init_seed);
        NatureResponse nature_new = nature_best_response(model, mu, psi_new, X, W, opts);
        double dq = 0.0;
        for (int p = 0; p < W.n_paths; ++p)
            dq += std::abs(nature_new.q.terminal(p) - nature.q.terminal(p));
        dq /= W.n_paths;
        psi = std::move(psi_new);
        nature = std::move(nature_new);
        const double J = nature.sup_value;
        s.J_history.push_back(J);
        const double dJ = J - prev_J;
        if (dJ * prev_dJ < 0.0) theta = std::max(0.5 * theta, 0.05);  // oscillation guard
        prev_dJ = dJ;
        prev_J = J;
        if (std::max(dpsi, dq) < opts.outer_tol) {
            converged = true;
            break;
        }
    }
    s.iterations = std::min(it, opts.max_outer);
    s.converged = converged;
    s.damping_used = theta;
    s.psi = psi;
    s.q = nature.q;
    s.value = nature.value;
    const TerminalContext ctx = model.g.context(mu);
    s.adjoint = solve_adjoint_bsde(X, s.q, model.coeffs, terminal_gradients(model, ctx, X, s.q),
                                   opts.adjoint_basis, W, model.coeffs.r_flag == 1);
    s.cost = cost_functional(model, mu, psi, s.q, X);
    s.J = s.cost.J;

    // minimax gap: q is already a best response to psi (max side); one extra
    // player best response against q gives the min side.
    {
        BestResponseDiag gap_br;
        const ControlField psi_plus =
            player_best_response(model, mu, s.q, W, init_seed, psi, opts, &gap_br);
        StatePaths Xp = simulate_state(model.coeffs, psi_plus, W, init_seed);
        const CostBreakdown min_side = cost_functional(model, mu, psi_plus, s.q, Xp);
        s.minimax_gap = std::abs(s.J - min_side.J);
        s.minimax_gap_se = std::sqrt(s.cost.se * s.cost.se + min_side.se * min_side.se);
    }
    s.residuals = pontryagin_residual(model, s, W, opts);
    return s;
}

PontryaginResidual pontryagin_residual(const GameModel& model, const SaddleState& s,
                                       const BrownianEnsemble& W, const SaddleOptions& opts) {
    PontryaginResidual out;
    StatePaths X = simulate_state(model.coeffs, s.psi, W, s.init_seed);
    const TerminalContext ctx = model.g.context(s.mu);
    const int K = X.grid.n_steps;
    const double dt = X.grid.dt();

    const GradientField grad = control_gradient(model, s.psi, s.q, s.adjoint, X);
    out.player_foc = grad.weighted_norm;

    // Nature map mismatch against a refit on a richer basis, so regression
    // error is measured instead of cancelling identically.
    {
        const DriverSpec scaled = model.driver.scaled(model.gamma);
        RegressionBasis rich = opts.value_basis;
        rich.degree = opts.value_basis.degree + 1;
        const std::vector<double> terminal = terminal_costs(model, ctx, X);
        const ValueSolution refit = solve_value_bsde(X, s.psi, terminal, scaled, model.ell, rich,
                                                     opts.picard_iters, W, nullptr,
                                                     opts.picard_tol);
        const NatureControl ref = nature_control_from_value(scaled, refit, X.grid);
        const NatureControl& nc = s.q.nature_control;
        double acc = 0.0;
        for (int p = 0; p < X.n_paths; ++p)
            for (int k = 0; k < K; ++k) {
                const double qk = s.q.q(p, k);
                const double dy = nc.y(p, k) - ref.y(p, k);
                double d2 = dy * dy;
                for (int j = 0; j < nc.d; ++j) {
                    const double dz = nc.z(p, k)[j] - ref.z(p, k)[j];
                    d2 += dz * dz;
                }
                acc += qk * d2 * dt;
            }
        out.nature_foc = std::sqrt(acc / X.n_paths);
    }

    // terminal conditions: held by construction, evaluated rather than assumed
    {
        double accp = 0.0, accy = 0.0;
        std::vector<double> gval(X.n);
        for (int p = 0; p < X.n_paths; ++p) {
            model.g.grad_x(X.node(p, K), ctx, gval.data());
            const double qT = s.q.terminal(p);
            double d2 = 0.0;
            for (int i = 0; i < X.n; ++i) {
                const double d = s.adjoint.p_at(p, K)[i] - qT * gval[i];
                d2 += d * d;
            }
            accp += d2;
            const double dy = s.value.y(p, K) - model.g.value(X.node(p, K), ctx);
            accy += dy * dy;
        }
        out.terminal_p = std::sqrt(accp / X.n_paths);
        out.terminal_Y = std::sqrt(accy / X.n_paths);
    }
    return out;
}

}  // namespace rmfg
