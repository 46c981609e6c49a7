#include "rmfg/monotone.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rmfg/rng.hpp"

namespace rmfg {

JointSampler gaussian_tilt_sampler(int dim, double spread, double shift, double corr,
                                   double zeta, double zeta2) {
    return [=](std::uint64_t seed, int n_draws) {
        JointSample s;
        s.dim = dim;
        s.q.resize(n_draws);
        s.q2.resize(n_draws);
        s.x.resize(static_cast<std::size_t>(n_draws) * dim);
        s.x2.resize(static_cast<std::size_t>(n_draws) * dim);
        StreamRng rng(seed, 0x90a7);
        for (int i = 0; i < n_draws; ++i) {
            double g_shared = rng.normal();
            for (int j = 0; j < dim; ++j) {
                const double g1 = rng.normal(), g2 = rng.normal();
                s.x[static_cast<std::size_t>(i) * dim + j] = spread * g1;
                s.x2[static_cast<std::size_t>(i) * dim + j] =
                    shift + spread * (corr * g1 + std::sqrt(1.0 - corr * corr) * g2);
            }
            // exponential-martingale weights, unit mean
            const double gq = rng.normal();
            s.q[i] = std::exp(zeta * g_shared - 0.5 * zeta * zeta);
            s.q2[i] = std::exp(zeta2 * (0.3 * g_shared + 0.954 * gq) - 0.5 * zeta2 * zeta2 *
                               (0.3 * 0.3 + 0.954 * 0.954));
        }
        return s;
    };
}

namespace {

WeightedMeasure effective_cloud(const JointSample& s, bool primed) {
    WeightedMeasure mu;
    mu.dim = s.dim;
    const int n = s.size();
    mu.points = primed ? s.x2 : s.x;
    mu.weights.resize(n);
    for (int i = 0; i < n; ++i) mu.weights[i] = (primed ? s.q2[i] : s.q[i]) / n;
    return mu;
}

McValue sample_mean_se(const std::vector<double>& v) {
    const std::size_t n = v.size();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = n > 1 ? var / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

}  // namespace

MonotonicityReport flat_displacement_test(const TerminalCostSpec& g, const JointSampler& sampler,
                                          int n_samples, std::uint64_t seed, int draws_per_law) {
    MonotonicityReport rep;
    rep.kind = "flat_displacement";
    rep.n_samples = n_samples;
    rep.worst_lhs = -1e300;
    for (int s = 0; s < n_samples; ++s) {
        const std::uint64_t law_seed = splitmix64(seed + s);
        const JointSample js = sampler(law_seed, draws_per_law);
        const WeightedMeasure mu = effective_cloud(js, false);
        const WeightedMeasure mu2 = effective_cloud(js, true);
        const TerminalContext ctx = g.context(mu);
        const TerminalContext ctx2 = g.context(mu2);
        std::vector<double> lhs(js.size());
        std::vector<double> grad(g.dim), grad2(g.dim);
        for (int i = 0; i < js.size(); ++i) {
            const double* x = js.x.data() + static_cast<std::size_t>(i) * js.dim;
            const double* x2 = js.x2.data() + static_cast<std::size_t>(i) * js.dim;
            const double flat =
                (js.q[i] - js.q2[i]) * (g.value(x, ctx) - g.value(x2, ctx2));
            g.grad_x(x, ctx, grad.data());
            g.grad_x(x2, ctx2, grad2.data());
            double dot = 0.0;
            for (int j = 0; j < js.dim; ++j)
                dot += (js.q[i] * grad[j] - js.q2[i] * grad2[j]) * (x[j] - x2[j]);
            lhs[i] = flat - dot;
        }
        const McValue m = sample_mean_se(lhs);
        if (m.mean > rep.worst_lhs) {
            rep.worst_lhs = m.mean;
            rep.worst_se = m.se;
            rep.worst_index = s;
            rep.worst_seed = law_seed;
        }
    }
    rep.passed = rep.worst_lhs <= 3.0 * rep.worst_se;
    return rep;
}

MonotonicityReport displacement_monotone_test(const TerminalCostSpec& g,
                                              const JointSampler& sampler, int n_samples,
                                              std::uint64_t seed, int draws_per_law) {
    MonotonicityReport rep;
    rep.kind = "displacement_monotone";
    rep.n_samples = n_samples;
    rep.worst_lhs = -1e300;
    for (int s = 0; s < n_samples; ++s) {
        const std::uint64_t law_seed = splitmix64(seed + s);
        JointSample js = sampler(law_seed, draws_per_law);
        std::fill(js.q.begin(), js.q.end(), 1.0);
        std::fill(js.q2.begin(), js.q2.end(), 1.0);
        const WeightedMeasure mu = effective_cloud(js, false);
        const WeightedMeasure mu2 = effective_cloud(js, true);
        const TerminalContext ctx = g.context(mu);
        const TerminalContext ctx2 = g.context(mu2);
        std::vector<double> neg(js.size());
        std::vector<double> grad(g.dim), grad2(g.dim);
        for (int i = 0; i < js.size(); ++i) {
            const double* x = js.x.data() + static_cast<std::size_t>(i) * js.dim;
            const double* x2 = js.x2.data() + static_cast<std::size_t>(i) * js.dim;
            g.grad_x(x, ctx, grad.data());
            g.grad_x(x2, ctx2, grad2.data());
            double dot = 0.0;
            for (int j = 0; j < js.dim; ++j) dot += (grad[j] - grad2[j]) * (x[j] - x2[j]);
            neg[i] = -dot;  // displacement monotonicity asks the dot to be >= 0
        }
        const McValue m = sample_mean_se(neg);
        if (m.mean > rep.worst_lhs) {
            rep.worst_lhs = m.mean;
            rep.worst_se = m.se;
            rep.worst_index = s;
            rep.worst_seed = law_seed;
        }
    }
    rep.passed = rep.worst_lhs <= 3.0 * rep.worst_se;
    return rep;
}

double flat_antimonotone_value(const TerminalCostSpec& g, const WeightedMeasure& m,
                               const WeightedMeasure& m_prime) {
    if (m.dim != m_prime.dim) throw std::invalid_argument("flat_antimonotone: dim mismatch");
    const TerminalContext ctx = g.context(m);
    const TerminalContext ctx_p = g.context(m_prime);
    double acc = 0.0;
    for (int i = 0; i < m.size(); ++i)
        acc += m.weights[i] * (g.value(m.point(i), ctx) - g.value(m.point(i), ctx_p));
    for (int i = 0; i < m_prime.size(); ++i)
        acc -= m_prime.weights[i] * (g.value(m_prime.point(i), ctx) - g.value(m_prime.point(i), ctx_p));
    return acc;
}

MonotonicityReport flat_antimonotone_test(
    const TerminalCostSpec& g,
    const std::vector<std::pair<WeightedMeasure, WeightedMeasure>>& pairs) {
    MonotonicityReport rep;
    rep.kind = "flat_antimonotone";
    rep.n_samples = static_cast<int>(pairs.size());
    rep.worst_lhs = -1e300;
    for (int i = 0; i < rep.n_samples; ++i) {
        const double v = flat_antimonotone_value(g, pairs[i].first, pairs[i].second);
        if (v > rep.worst_lhs) {
            rep.worst_lhs = v;
            rep.worst_index = i;
        }
    }
    rep.worst_se = 0.0;  // exact discrete evaluation
    rep.passed = rep.worst_lhs <= 1e-12;
    return rep;
}

double negative_type_test(const KernelSpec& K, const WeightedMeasure& points,
                          const std::vector<std::vector<double>>& h_list) {
    const int m = points.size();
    if (m < 2) throw std::invalid_argument("negative_type_test: need at least 2 points");
    Eigen::MatrixXd k(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            k(i, j) = K.value(points.point(i), points.point(j), points.dim);
    double worst = -1e300;
    for (const auto& h : h_list) {
        if (static_cast<int>(h.size()) != m)
            throw std::invalid_argument("negative_type_test: h size mismatch");
        const Eigen::Map<const Eigen::VectorXd> hv(h.data(), m);
        worst = std::max(worst, double(hv.transpose() * k * hv));
    }
    // top eigenvalue of the symmetrized Gram matrix; conclusive for the
    // symmetric part only (antisymmetric kernels symmetrize to zero)
    const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    worst = std::max(worst, eig.eigenvalues().maxCoeff());
    return worst;
}

TerminalCostSpec build_kernel_cost(const KernelCost& kc, std::uint64_t probe_seed) {
    if (kc.bump == TerminalCostSpec::Bump::Quadratic && kc.r_flag != 0)
        throw std::invalid_argument("build_kernel_cost: quadratic bump requires r = 0");
    if (kc.bump == TerminalCostSpec::Bump::SqrtQuadratic && kc.r_flag != 1)
        throw std::invalid_argument("build_kernel_cost: sqrt bump requires r = 1");
    if (!(kc.lambda > 0.0)) throw std::invalid_argument("build_kernel_cost: lambda > 0 required");

    // probe sample for the negative-type check
    WeightedMeasure probe;
    probe.dim = kc.dim;
    const int m = 24;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < kc.dim; ++j)
            probe.points.push_back(6.0 * (halton(probe_seed + i, 2 + j) - 0.5));
        probe.weights.push_back(1.0 / m);
    }
    std::vector<std::vector<double>> hs;
    StreamRng rng(probe_seed, 0x4e9);
    for (int t = 0; t < 8; ++t) {
        std::vector<double> h(m);
        for (int i = 0; i < m; ++i) h[i] = rng.normal();
        hs.push_back(std::move(h));
    }
    const double worst = negative_type_test(kc.kernel, probe, hs);
    if (worst > 1e-8)
        throw std::invalid_argument(
            "build_kernel_cost: kernel failed the negative-type probe, worst value " +
            std::to_string(worst));

    TerminalCostSpec g;
    g.kind = TerminalCostSpec::Kind::Kernel;
    g.dim = kc.dim;
    g.lambda = kc.lambda;
    g.bump = kc.bump;
    g.kernel = kc.kernel;
    return g;
}

}  // namespace rmfg
