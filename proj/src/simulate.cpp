#include "rmfg/simulate.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rmfg/parallel.hpp"
#include "rmfg/rng.hpp"

namespace rmfg {

BrownianEnsemble sample_brownian(const TimeGrid& grid, int n_paths, int d, std::uint64_t seed) {
    if (n_paths < 1) throw std::invalid_argument("sample_brownian: n_paths >= 1 required");
    BrownianEnsemble W;
    W.grid = grid;
    W.n_paths = n_paths;
    W.d = d;
    W.seed = seed;
    W.dw.resize(static_cast<std::size_t>(n_paths) * grid.n_steps * d);
    const double sd = std::sqrt(grid.dt());
    parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            StreamRng rng(seed, p);
            double* row = W.dw.data() + p * grid.n_steps * d;
            for (int k = 0; k < grid.n_steps * d; ++k) row[k] = sd * rng.normal();
        }
    });
    return W;
}

ControlField ControlField::zero(int n_paths, int n_steps, int dim) {
    ControlField c;
    c.param = Param::OpenLoopTable;
    c.n_paths = n_paths;
    c.n_steps = n_steps;
    c.dim = dim;
    c.values.assign(static_cast<std::size_t>(n_paths) * n_steps * dim, 0.0);
    return c;
}

ControlField ControlField::constant(int n_paths, int n_steps, const Eigen::VectorXd& value) {
    ControlField c = zero(n_paths, n_steps, static_cast<int>(value.size()));
    for (int p = 0; p < n_paths; ++p)
        for (int k = 0; k < n_steps; ++k)
            for (int j = 0; j < c.dim; ++j) c.value_at(p, k)[j] = value[j];
    return c;
}

ControlField ControlField::affine_feedback(int n_steps, int dim, int state_dim) {
    ControlField c;
    c.param = Param::AffineFeedback;
    c.n_steps = n_steps;
    c.dim = dim;
    c.state_dim = state_dim;
    c.feedback.assign(static_cast<std::size_t>(n_steps) * dim * (state_dim + 1), 0.0);
    return c;
}

void ControlField::eval(int p, int k, const double* x, double* out) const {
    if (param == Param::OpenLoopTable) {
        const double* v = value_at(p, k);
        for (int j = 0; j < dim; ++j) out[j] = v[j];
        return;
    }
    const double* coef = feedback.data() + static_cast<std::size_t>(k) * dim * (state_dim + 1);
    for (int j = 0; j < dim; ++j) {
        double v = coef[j * (state_dim + 1) + state_dim];
        for (int s = 0; s < state_dim; ++s) v += coef[j * (state_dim + 1) + s] * x[s];
        out[j] = v;
    }
}

double ControlField::l2_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return values.empty() ? 0.0 : std::sqrt(s / values.size());
}

double ControlField::l2_distance(const ControlField& other) const {
    if (values.size() != other.values.size())
        throw std::invalid_argument("l2_distance: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - other.values[i];
        s += d * d;
    }
    return std::sqrt(s / values.size());
}

StatePaths simulate_state(const ModelCoefficients& coeffs, const ControlField& control,
                          const BrownianEnsemble& W, std::uint64_t init_seed) {
    const int n = coeffs.state_dim, d = coeffs.noise_dim;
    const int K = W.grid.n_steps;
    if (control.param == ControlField::Param::OpenLoopTable &&
        (control.n_paths != W.n_paths || control.n_steps != K || control.dim != n))
        throw std::invalid_argument("simulate_state: control/ensemble shape mismatch");
    StatePaths X;
    X.grid = W.grid;
    X.n_paths = W.n_paths;
    X.n = n;
    X.init_seed = init_seed;
    X.values.resize(static_cast<std::size_t>(W.n_paths) * (K + 1) * n);
    const double dt = W.grid.dt();

    // coefficient tables per step (deterministic in time)
    std::vector<Eigen::MatrixXd> at(K), bt(K), ct(K), nut(K);
    for (int k = 0; k < K; ++k) {
        const double t = W.grid.node(k);
        at[k] = coeffs.a.eval(t);
        bt[k] = coeffs.b.eval(t);
        ct[k] = coeffs.c.eval(t);
        nut[k] = coeffs.nu.eval(t);
    }
    const bool has_sigma = coeffs.r_flag == 1 && !coeffs.sigma_tensor.empty();

    std::size_t bad_path = static_cast<std::size_t>(-1);
    int bad_step = -1;
    parallel_for(W.n_paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> psi(n), drift(n), diff(n);
        for (std::size_t p = begin; p < end; ++p) {
            StreamRng rng(init_seed, p);
            double* x = X.node(static_cast<int>(p), 0);
            coeffs.initial_law.sample(rng, x, n);
            for (int k = 0; k < K; ++k) {
                const double* xk = X.node(static_cast<int>(p), k);
                double* xn = X.node(static_cast<int>(p), k + 1);
                control.eval(static_cast<int>(p), k, xk, psi.data());
                const double* dwk = W.path(static_cast<int>(p)) + static_cast<std::size_t>(k) * d;
                for (int i = 0; i < n; ++i) {
                    double dr = at[k](i, 0);
                    for (int j = 0; j < n; ++j)
                        dr += bt[k](i, j) * xk[j] + ct[k](i, j) * psi[j];
                    double di = 0.0;
                    for (int j = 0; j < d; ++j) {
                        double vol = nut[k](i, j);
                        if (has_sigma)
                            for (int l = 0; l < n; ++l) vol += coeffs.sigma_entry(i, j, l) * psi[l];
                        di += vol * dwk[j];
                    }
                    xn[i] = xk[i] + dr * dt + di;
                    if (!std::isfinite(xn[i])) {
                        bad_path = p;
                        bad_step = k;
                    }
                }
            }
        }
    });
    if (bad_step >= 0)
        throw std::runtime_error("simulate_state: non-finite state at path " +
                                 std::to_string(bad_path) + ", step " + std::to_string(bad_step));
    return X;
}

ControlField materialize(const ControlField& control, const StatePaths& X) {
    if (control.param == ControlField::Param::OpenLoopTable) return control;
    ControlField out = ControlField::zero(X.n_paths, X.grid.n_steps, control.dim);
    parallel_for(X.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p)
            for (int k = 0; k < X.grid.n_steps; ++k)
                control.eval(static_cast<int>(p), k, X.node(static_cast<int>(p), k),
                             out.value_at(static_cast<int>(p), k));
    });
    return out;
}

NatureControl NatureControl::zero(int n_paths, int n_steps, int d, double alpha) {
    NatureControl nc;
    nc.n_paths = n_paths;
    nc.n_steps = n_steps;
    nc.d = d;
    nc.alpha_bound = alpha;
    nc.y_star.assign(static_cast<std::size_t>(n_paths) * n_steps, 0.0);
    nc.z_star.assign(static_cast<std::size_t>(n_paths) * n_steps * d, 0.0);
    return nc;
}

DensityProcess DensityProcess::unit(const TimeGrid& grid, int n_paths, int d) {
    DensityProcess q;
    q.grid = grid;
    q.n_paths = n_paths;
    q.uses_ystar = false;
    q.nature_control = NatureControl::zero(n_paths, grid.n_steps, d);
    q.log_q.assign(static_cast<std::size_t>(n_paths) * (grid.n_steps + 1), 0.0);
    return q;
}

DensityProcess simulate_density(const NatureControl& nc, const BrownianEnsemble& W,
                                double log_overflow_bound) {
    if (nc.n_paths != W.n_paths || nc.n_steps != W.grid.n_steps || nc.d != W.d)
        throw std::invalid_argument("simulate_density: control/ensemble shape mismatch");
    DensityProcess q;
    q.grid = W.grid;
    q.n_paths = W.n_paths;
    q.nature_control = nc;
    q.log_q.resize(static_cast<std::size_t>(W.n_paths) * (W.grid.n_steps + 1));
    const double dt = W.grid.dt();
    bool uses_y = false;
    for (double y : nc.y_star)
        if (y != 0.0) {
            uses_y = true;
            break;
        }
    q.uses_ystar = uses_y;
    if (uses_y && nc.alpha_bound >= 0.0) {
        for (double y : nc.y_star)
            if (std::abs(y) > nc.alpha_bound + 1e-12)
                throw std::invalid_argument("simulate_density: |y*| exceeds alpha");
    }
    std::size_t bad_path = static_cast<std::size_t>(-1);
    parallel_for(W.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double* lq = q.log_q.data() + p * (W.grid.n_steps + 1);
            lq[0] = 0.0;
            for (int k = 0; k < W.grid.n_steps; ++k) {
                const double* z = nc.z(static_cast<int>(p), k);
                const double* dw = W.path(static_cast<int>(p)) + static_cast<std::size_t>(k) * W.d;
                double zdw = 0.0, z2 = 0.0;
                for (int j = 0; j < W.d; ++j) {
                    zdw += z[j] * dw[j];
                    z2 += z[j] * z[j];
                }
                lq[k + 1] = lq[k] + nc.y(static_cast<int>(p), k) * dt + zdw - 0.5 * z2 * dt;
                if (std::abs(lq[k + 1]) > log_overflow_bound) bad_path = p;
            }
        }
    });
    if (bad_path != static_cast<std::size_t>(-1))
        throw std::runtime_error("simulate_density: log-density overflow at path " +
                                 std::to_string(bad_path));
    return q;
}

McValue generalized_entropy(const DensityProcess& q, const DriverSpec& driver) {
    const int K = q.grid.n_steps;
    const double dt = q.grid.dt();
    const NatureControl& nc = q.nature_control;
    std::vector<double> per_path(q.n_paths);
    std::vector<char> infinite(q.n_paths, 0);
    parallel_for(q.n_paths, [&](std::size_t begin, std::size_t end) {
        Eigen::VectorXd z(nc.d);
        for (std::size_t p = begin; p < end; ++p) {
            double acc = 0.0;
            for (int k = 0; k < K; ++k) {
                for (int j = 0; j < nc.d; ++j) z[j] = nc.z(static_cast<int>(p), k)[j];
                const DualValue fs =
                    driver.f_star(q.grid.node(k), nc.y(static_cast<int>(p), k), z);
                if (fs.infinite) {
                    infinite[p] = 1;
                    break;
                }
                acc += 0.5 * (q.q(static_cast<int>(p), k) + q.q(static_cast<int>(p), k + 1)) *
                       fs.value * dt;
            }
            per_path[p] = acc;
        }
    });
    for (int p = 0; p < q.n_paths; ++p)
        if (infinite[p])
            throw std::runtime_error("generalized_entropy: infinite f* on path " +
                                     std::to_string(p));
    double mean = 0.0;
    for (double v : per_path) mean += v;
    mean /= q.n_paths;
    double var = 0.0;
    for (double v : per_path) var += (v - mean) * (v - mean);
    var = q.n_paths > 1 ? var / (q.n_paths - 1.0) : 0.0;
    return {mean, std::sqrt(var / q.n_paths)};
}

double ent(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("ent: input must be positive");
    return x * (std::log(x) - 1.0);
}

DualEntropyResult dual_entropy_quadratic(const ControlField& psi, const TimeGrid& grid,
                                         double gamma, double exponent_bound) {
    if (!(gamma > 0.0)) throw std::invalid_argument("dual_entropy_quadratic: gamma > 0 required");
    if (psi.param != ControlField::Param::OpenLoopTable)
        throw std::invalid_argument("dual_entropy_quadratic: open-loop table expected");
    if (psi.n_steps != grid.n_steps)
        throw std::invalid_argument("dual_entropy_quadratic: grid mismatch");
    DualEntropyResult out;
    const int n_paths = psi.n_paths;
    const double dt = grid.dt();
    std::vector<double> expo(n_paths);
    parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double acc = 0.0;
            for (int k = 0; k < psi.n_steps; ++k) {
                const double* v = psi.value_at(static_cast<int>(p), k);
                double n2 = 0.0;
                for (int j = 0; j < psi.dim; ++j) n2 += v[j] * v[j];
                acc += n2 * dt;
            }
            expo[p] = acc / gamma;
        }
    });
    double m = expo[0];
    for (double e : expo) m = std::max(m, e);
    out.max_exponent = m;
    if (m > exponent_bound) {
        out.overflow = true;
        return out;
    }
    // log-sum-exp with a delta-method standard error
    double mean_w = 0.0;
    for (double e : expo) mean_w += std::exp(e - m);
    mean_w /= n_paths;
    double var_w = 0.0;
    for (double e : expo) {
        const double d = std::exp(e - m) - mean_w;
        var_w += d * d;
    }
    var_w = n_paths > 1 ? var_w / (n_paths - 1.0) : 0.0;
    out.value = gamma * (m + std::log(mean_w));
    out.se = gamma * std::sqrt(var_w / n_paths) / mean_w;
    return out;
}

DualityGapResult duality_gap(const DensityProcess& q, const ControlField& zeta, double gamma,
                             const DriverSpec& driver) {
    if (!driver.is_quadratic())
        throw std::invalid_argument("duality_gap: S* is evaluable for the quadratic benchmark only");
    if (zeta.n_paths != q.n_paths || zeta.n_steps != q.grid.n_steps)
        throw std::invalid_argument("duality_gap: shape mismatch");
    DualityGapResult out;
    const McValue S = generalized_entropy(q, driver);
    out.S = S.mean;
    out.S_se = S.se;
    const DualEntropyResult dual = dual_entropy_quadratic(zeta, q.grid, gamma);
    out.overflow = dual.overflow;
    if (dual.overflow) return out;
    out.S_star = dual.value;
    out.S_star_se = dual.se;
    const double dt = q.grid.dt();
    std::vector<double> per_path(q.n_paths);
    parallel_for(q.n_paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            double acc = 0.0;
            for (int k = 0; k < q.grid.n_steps; ++k) {
                const double* v = zeta.value_at(static_cast<int>(p), k);
                double n2 = 0.0;
                for (int j = 0; j < zeta.dim; ++j) n2 += v[j] * v[j];
                acc += 0.5 * (q.q(static_cast<int>(p), k) + q.q(static_cast<int>(p), k + 1)) * n2 *
                       dt;
            }
            per_path[p] = acc;
        }
    });
    double mean = 0.0;
    for (double v : per_path) mean += v;
    mean /= q.n_paths;
    double var = 0.0;
    for (double v : per_path) var += (v - mean) * (v - mean);
    var = q.n_paths > 1 ? var / (q.n_paths - 1.0) : 0.0;
    out.cross = mean;
    out.cross_se = std::sqrt(var / q.n_paths);
    out.gap = out.S + out.S_star - out.cross / gamma;
    out.tight_gap = gamma * out.S + out.S_star - out.cross;
    out.se = std::sqrt(out.S_se * out.S_se + out.S_star_se * out.S_star_se +
                       out.cross_se * out.cross_se / (gamma * gamma));
    return out;
}

EntropyMassDiagnostics entropy_mass_diagnostics(const DensityProcess& q, const DriverSpec& driver,
                                                double C) {
    EntropyMassDiagnostics out;
    double acc = 0.0;
    for (int p = 0; p < q.n_paths; ++p) {
        const double lq = q.log_at(p, q.grid.n_steps);
        acc += std::exp(lq) * (lq - 1.0);
    }
    out.e_ent_qT = acc / q.n_paths;
    out.s_q = generalized_entropy(q, driver).mean;
    out.bound_slack = C * (1.0 + out.s_q) - out.e_ent_qT;
    return out;
}

McValue density_mass(const DensityProcess& q, int node) {
    double mean = 0.0;
    for (int p = 0; p < q.n_paths; ++p) mean += q.q(p, node);
    mean /= q.n_paths;
    double var = 0.0;
    for (int p = 0; p < q.n_paths; ++p) {
        const double d = q.q(p, node) - mean;
        var += d * d;
    }
    var = q.n_paths > 1 ? var / (q.n_paths - 1.0) : 0.0;
    return {mean, std::sqrt(var / q.n_paths)};
}

void dump_ensemble(const std::string& path, const StatePaths& X) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    const char magic[8] = {'R', 'M', 'F', 'G', 'D', 'M', 'P', '1'};
    f.write(magic, 8);
    const std::uint32_t np = X.n_paths, nodes = X.grid.n_steps + 1, dim = X.n;
    const std::uint64_t seed = X.init_seed;
    const double T = X.grid.horizon;
    f.write(reinterpret_cast<const char*>(&np), 4);
    f.write(reinterpret_cast<const char*>(&nodes), 4);
    f.write(reinterpret_cast<const char*>(&dim), 4);
    f.write(reinterpret_cast<const char*>(&seed), 8);
    f.write(reinterpret_cast<const char*>(&T), 8);
    f.write(reinterpret_cast<const char*>(X.values.data()),
            static_cast<std::streamsize>(X.values.size() * sizeof(double)));
}

void summary_csv(const std::string& path, const StatePaths& X) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << "# schema=1\nnode,t";
    for (int j = 0; j < X.n; ++j) f << ",mean" << j << ",var" << j;
    f << "\n";
    f.precision(12);
    for (int k = 0; k <= X.grid.n_steps; ++k) {
        f << k << "," << X.grid.node(k);
        for (int j = 0; j < X.n; ++j) {
            double m = 0.0;
            for (int p = 0; p < X.n_paths; ++p) m += X.node(p, k)[j];
            m /= X.n_paths;
            double v = 0.0;
            for (int p = 0; p < X.n_paths; ++p) {
                const double d = X.node(p, k)[j] - m;
                v += d * d;
            }
            v = X.n_paths > 1 ? v / (X.n_paths - 1.0) : 0.0;
            f << "," << m << "," << v;
        }
        f << "\n";
    }
}

}  // namespace rmfg
