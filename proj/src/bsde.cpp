#include "rmfg/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rmfg/parallel.hpp"

namespace rmfg {

namespace {

// Cross-sectional regression at one time step. Features are standardized
// monomials of the state (optionally scaled by the density); the normal
// equations get a small ridge so collinear columns stay solvable.
class StepRegression {
public:
    StepRegression(const StatePaths& X, int step, const RegressionBasis& basis,
                   const DensityProcess* q)
        : X_(X), step_(step), basis_(basis), q_(q) {
        n_ = X.n;
        monomials_ = build_exponents(n_, basis.kind == RegressionBasis::Kind::Polynomial
                                             ? basis.degree
                                             : 1);
        if (basis.kind == RegressionBasis::Kind::LocalBins) setup_bins();
        standardize();
    }

    int n_features() const {
        if (basis_.kind == RegressionBasis::Kind::LocalBins)
            return basis_.bins * 2;  // piecewise linear in the first coordinate
        return static_cast<int>(monomials_.size());
    }

    void features(int path, double* out) const {
        if (basis_.kind == RegressionBasis::Kind::LocalBins) {
            bin_features(path, out);
        } else {
            const double* x = X_.node(path, step_);
            for (std::size_t m = 0; m < monomials_.size(); ++m) {
                double v = 1.0;
                for (int j = 0; j < n_; ++j) {
                    const double s = (x[j] - mean_[j]) / sd_[j];
                    for (int e = 0; e < monomials_[m][j]; ++e) v *= s;
                }
                out[m] = v;
            }
        }
        if (basis_.multiply_by_density && q_ != nullptr) {
            const double w = q_->q(path, step_);
            for (int m = 0; m < n_features(); ++m) out[m] *= w;
        }
    }

    // Fits the targets (columns of Y, n_targets per path) and evaluates the
    // fitted function back on every path.
    void fit_predict(const std::vector<double>& targets, int n_targets,
                     std::vector<double>& out) const {
        const int B = n_features();
        const int n_paths = X_.n_paths;
        const std::size_t n_chunks =
            (static_cast<std::size_t>(n_paths) + kParallelChunk - 1) / kParallelChunk;
        std::vector<Eigen::MatrixXd> gram(n_chunks, Eigen::MatrixXd::Zero(B, B));
        std::vector<Eigen::MatrixXd> rhs(n_chunks, Eigen::MatrixXd::Zero(B, n_targets));
        parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
            const std::size_t c = begin / kParallelChunk;
            Eigen::VectorXd phi(B);
            for (std::size_t p = begin; p < end; ++p) {
                features(static_cast<int>(p), phi.data());
                gram[c].selfadjointView<Eigen::Lower>().rankUpdate(phi);
                for (int tgt = 0; tgt < n_targets; ++tgt)
                    rhs[c].col(tgt) += phi * targets[p * n_targets + tgt];
            }
        });
        Eigen::MatrixXd G = Eigen::MatrixXd::Zero(B, B);
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(B, n_targets);
        for (std::size_t c = 0; c < n_chunks; ++c) {
            G += gram[c];
            R += rhs[c];
        }
        G = G.selfadjointView<Eigen::Lower>();
        G.diagonal().array() += basis_.ridge * n_paths + 1e-300;
        const Eigen::LDLT<Eigen::MatrixXd> solver(G);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("regression: normal equations not solvable at step " +
                                     std::to_string(step_));
        const Eigen::MatrixXd beta = solver.solve(R);
        out.resize(static_cast<std::size_t>(n_paths) * n_targets);
        parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
            Eigen::VectorXd phi(B);
            for (std::size_t p = begin; p < end; ++p) {
                features(static_cast<int>(p), phi.data());
                for (int tgt = 0; tgt < n_targets; ++tgt)
                    out[p * n_targets + tgt] = phi.dot(beta.col(tgt));
            }
        });
    }

private:
    static std::vector<std::vector<int>> build_exponents(int n, int degree) {
        std::vector<std::vector<int>> out;
        std::vector<int> cur(n, 0);
        build_rec(out, cur, 0, degree);
        return out;
    }
    static void build_rec(std::vector<std::vector<int>>& out, std::vector<int>& cur, int j,
                          int left) {
        if (j == static_cast<int>(cur.size())) {
            out.push_back(cur);
            return;
        }
        for (int e = 0; e <= left; ++e) {
            cur[j] = e;
            build_rec(out, cur, j + 1, left - e);
        }
        cur[j] = 0;
    }

    void standardize() {
        mean_.assign(n_, 0.0);
        sd_.assign(n_, 1.0);
        const int n_paths = X_.n_paths;
        for (int j = 0; j < n_; ++j) {
            const double m =
                deterministic_sum(n_paths, [&](std::size_t p) {
                    return X_.node(static_cast<int>(p), step_)[j];
                }) /
                n_paths;
            const double v =
                deterministic_sum(n_paths, [&](std::size_t p) {
                    const double d = X_.node(static_cast<int>(p), step_)[j] - m;
                    return d * d;
                }) /
                n_paths;
            mean_[j] = m;
            sd_[j] = v > 1e-14 ? std::sqrt(v) : 1.0;
        }
    }

    void setup_bins() {
        // quantile edges of the first coordinate
        std::vector<double> xs(X_.n_paths);
        for (int p = 0; p < X_.n_paths; ++p) xs[p] = X_.node(p, step_)[0];
        std::sort(xs.begin(), xs.end());
        edges_.resize(basis_.bins + 1);
        for (int b = 0; b <= basis_.bins; ++b) {
            const std::size_t idx = std::min<std::size_t>(
                xs.size() - 1, static_cast<std::size_t>(b * (xs.size() - 1.0) / basis_.bins));
            edges_[b] = xs[idx];
        }
    }

    void bin_features(int path, double* out) const {
        const double x = X_.node(path, step_)[0];
        int b = 0;
        while (b + 1 < basis_.bins && x > edges_[b + 1]) ++b;
        for (int i = 0; i < basis_.bins * 2; ++i) out[i] = 0.0;
        out[2 * b] = 1.0;
        out[2 * b + 1] = (x - mean_[0]) / sd_[0];
    }

    const StatePaths& X_;
    int step_;
    RegressionBasis basis_;
    const DensityProcess* q_;
    int n_ = 1;
    std::vector<std::vector<int>> monomials_;
    std::vector<double> mean_, sd_;
    std::vector<double> edges_;
};

}  // namespace

ValueSolution solve_value_bsde(const StatePaths& X, const ControlField& psi,
                               const std::vector<double>& terminal, const DriverSpec& driver,
                               const RunningCostSpec& ell, const RegressionBasis& basis,
                               int picard_iters, const BrownianEnsemble& W,
                               const DensityProcess* weight, double picard_tol) {
    const int n_paths = X.n_paths;
    const int K = X.grid.n_steps;
    const int d = W.d;
    if (static_cast<int>(terminal.size()) != n_paths)
        throw std::invalid_argument("solve_value_bsde: terminal size mismatch");
    if (picard_iters < 1) throw std::invalid_argument("solve_value_bsde: picard_iters >= 1");
    for (double v : terminal)
        if (!std::isfinite(v)) throw std::invalid_argument("solve_value_bsde: non-finite terminal");

    ValueSolution sol;
    sol.n_paths = n_paths;
    sol.n_steps = K;
    sol.d = d;
    sol.Y.assign(static_cast<std::size_t>(n_paths) * (K + 1), 0.0);
    sol.Z.assign(static_cast<std::size_t>(n_paths) * K * d, 0.0);
    for (int p = 0; p < n_paths; ++p) sol.Y[static_cast<std::size_t>(p) * (K + 1) + K] = terminal[p];

    const double dt = X.grid.dt();
    std::vector<double> targets(static_cast<std::size_t>(n_paths) * (1 + d));
    std::vector<double> fitted;
    std::vector<double> picard_res;

    for (int k = K - 1; k >= 0; --k) {
        const double t = X.grid.node(k);
        // regression targets: [Y_{k+1}, Y_{k+1} dW_j / dt ...]
        parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                const double ynext = sol.Y[p * (K + 1) + k + 1];
                targets[p * (1 + d)] = ynext;
                const double* dw = W.path(static_cast<int>(p)) + static_cast<std::size_t>(k) * d;
                for (int j = 0; j < d; ++j) targets[p * (1 + d) + 1 + j] = ynext * dw[j] / dt;
            }
        });
        StepRegression reg(X, k, basis, weight);
        reg.fit_predict(targets, 1 + d, fitted);

        // implicit Picard solve per path: y = CE + dt (f(t, y, z) + ell)
        std::vector<double> iter_change(picard_iters, 0.0);
        const std::size_t n_chunks =
            (static_cast<std::size_t>(n_paths) + kParallelChunk - 1) / kParallelChunk;
        std::vector<std::vector<double>> chunk_change(n_chunks,
                                                      std::vector<double>(picard_iters, 0.0));
        parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
            const std::size_t c = begin / kParallelChunk;
            Eigen::VectorXd z(d), psi_k(X.n);
            for (std::size_t p = begin; p < end; ++p) {
                const double ce = fitted[p * (1 + d)];
                for (int j = 0; j < d; ++j) {
                    z[j] = fitted[p * (1 + d) + 1 + j];
                    sol.Z[(p * K + k) * d + j] = z[j];
                }
                psi.eval(static_cast<int>(p), k, X.node(static_cast<int>(p), k), psi_k.data());
                const double run = ell.value(t, psi_k);
                double y = ce;
                for (int it = 0; it < picard_iters; ++it) {
                    const double ynew = ce + dt * (driver.f(t, y, z) + run);
                    const double change = std::abs(ynew - y);
                    chunk_change[c][it] = std::max(chunk_change[c][it], change);
                    y = ynew;
                    if (change < picard_tol) break;
                }
                sol.Y[p * (K + 1) + k] = y;
            }
        });
        for (int it = 0; it < picard_iters; ++it) {
            double m = 0.0;
            for (const auto& cc : chunk_change) m = std::max(m, cc[it]);
            iter_change[it] = m;
        }
        if (picard_res.size() < static_cast<std::size_t>(picard_iters))
            picard_res.resize(picard_iters, 0.0);
        for (int it = 0; it < picard_iters; ++it)
            picard_res[it] = std::max(picard_res[it], iter_change[it]);
        if (iter_change[picard_iters - 1] >= picard_tol && picard_iters > 1)
            sol.picard_converged = false;
    }
    // drop trailing zero entries
    while (!picard_res.empty() && picard_res.back() == 0.0) picard_res.pop_back();
    sol.residual_history = picard_res;
    return sol;
}

AdjointSolution solve_adjoint_bsde(const StatePaths& X, const DensityProcess& q,
                                   const ModelCoefficients& coeffs,
                                   const std::vector<double>& terminal_grad,
                                   const RegressionBasis& basis, const BrownianEnsemble& W,
                                   bool compute_k) {
    const int n_paths = X.n_paths;
    const int K = X.grid.n_steps;
    const int n = X.n;
    const int d = W.d;
    if (static_cast<int>(terminal_grad.size()) != n_paths * n)
        throw std::invalid_argument("solve_adjoint_bsde: terminal size mismatch");
    AdjointSolution sol;
    sol.n_paths = n_paths;
    sol.n_steps = K;
    sol.n = n;
    sol.d = d;
    sol.p.assign(static_cast<std::size_t>(n_paths) * (K + 1) * n, 0.0);
    sol.k_computed = compute_k;
    if (compute_k) sol.k.assign(static_cast<std::size_t>(n_paths) * K * n * d, 0.0);
    for (int p = 0; p < n_paths; ++p)
        for (int i = 0; i < n; ++i)
            sol.p[(static_cast<std::size_t>(p) * (K + 1) + K) * n + i] = terminal_grad[p * n + i];

    const double dt = X.grid.dt();
    const int n_targets = compute_k ? n * (1 + d) : n;
    std::vector<double> targets(static_cast<std::size_t>(n_paths) * n_targets);
    std::vector<double> fitted;
    for (int k = K - 1; k >= 0; --k) {
        parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
            for (std::size_t p = begin; p < end; ++p) {
                const double* pnext = sol.p.data() + (p * (K + 1) + k + 1) * n;
                const double* dw = W.path(static_cast<int>(p)) + static_cast<std::size_t>(k) * d;
                for (int i = 0; i < n; ++i) {
                    targets[p * n_targets + i] = pnext[i];
                    if (compute_k)
                        for (int j = 0; j < d; ++j)
                            targets[p * n_targets + n + i * d + j] = pnext[i] * dw[j] / dt;
                }
            }
        });
        StepRegression reg(X, k, basis, &q);
        reg.fit_predict(targets, n_targets, fitted);
        // implicit linear step: p_k = (I - dt b^T)^{-1} E_k[p_{k+1}]
        const Eigen::MatrixXd bT = coeffs.b.eval(X.grid.node(k)).transpose();
        const Eigen::MatrixXd A =
            (Eigen::MatrixXd::Identity(n, n) - dt * bT).inverse();
        parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
            Eigen::VectorXd ce(n);
            for (std::size_t p = begin; p < end; ++p) {
                for (int i = 0; i < n; ++i) ce[i] = fitted[p * n_targets + i];
                const Eigen::VectorXd pk = A * ce;
                for (int i = 0; i < n; ++i) sol.p[(p * (K + 1) + k) * n + i] = pk[i];
                if (compute_k)
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < d; ++j)
                            sol.k[(p * K + k) * n * d + i * d + j] =
                                fitted[p * n_targets + n + i * d + j];
            }
        });
    }
    return sol;
}

NatureControl nature_control_from_value(const DriverSpec& driver, const ValueSolution& v,
                                        const TimeGrid& grid, long* clip_count) {
    NatureControl nc = NatureControl::zero(v.n_paths, v.n_steps, v.d, driver.alpha);
    long clips = 0;
    Eigen::VectorXd z(v.d);
    for (int p = 0; p < v.n_paths; ++p)
        for (int k = 0; k < v.n_steps; ++k) {
            for (int j = 0; j < v.d; ++j) z[j] = v.z(p, k)[j];
            const double t = grid.node(k);
            double ys = driver.df_dy(t, v.y(p, k), z);
            if (std::abs(ys) > driver.alpha) {
                ys = std::clamp(ys, -driver.alpha, driver.alpha);
                ++clips;
            }
            nc.y_star[static_cast<std::size_t>(p) * v.n_steps + k] = ys;
            const Eigen::VectorXd zs = driver.df_dz(t, v.y(p, k), z);
            for (int j = 0; j < v.d; ++j) nc.z(p, k)[j] = zs[j];
        }
    if (clip_count != nullptr) *clip_count = clips;
    return nc;
}

}  // namespace rmfg
