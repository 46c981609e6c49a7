#include "rmfg/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rmfg {

// --------------------------------------------------------------------------
// TimeMatrixFn
// --------------------------------------------------------------------------

TimeMatrixFn TimeMatrixFn::constant(int rows, int cols, double v) {
    TimeMatrixFn f;
    f.kind = Kind::Constant;
    f.rows = rows;
    f.cols = cols;
    f.base.assign(static_cast<std::size_t>(rows) * cols, v);
    return f;
}

TimeMatrixFn TimeMatrixFn::constant(const Eigen::MatrixXd& m) {
    TimeMatrixFn f;
    f.kind = Kind::Constant;
    f.rows = static_cast<int>(m.rows());
    f.cols = static_cast<int>(m.cols());
    f.base.resize(static_cast<std::size_t>(f.rows) * f.cols);
    for (int i = 0; i < f.rows; ++i)
        for (int j = 0; j < f.cols; ++j) f.base[static_cast<std::size_t>(i) * f.cols + j] = m(i, j);
    return f;
}

Eigen::MatrixXd TimeMatrixFn::eval(double t) const {
    Eigen::MatrixXd m(rows, cols);
    if (kind == Kind::PiecewiseConstant) {
        std::size_t piece = 0;
        while (piece + 1 < pieces.size() && piece < knots.size() && t >= knots[piece]) ++piece;
        const auto& v = pieces.at(piece);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i) * cols + j];
        return m;
    }
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * cols + j;
            double v = base[k];
            if (kind == Kind::Affine) v += slope[k] * t;
            m(i, j) = v;
        }
    return m;
}

double TimeMatrixFn::sup_abs(double horizon, int samples) const {
    double m = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double t = horizon * s / (samples - 1.0);
        m = std::max(m, eval(t).cwiseAbs().maxCoeff());
    }
    return m;
}

// --------------------------------------------------------------------------
// InitialLaw
// --------------------------------------------------------------------------

void InitialLaw::sample(StreamRng& rng, double* out, int dim) const {
    switch (kind) {
        case Kind::Point:
            for (int i = 0; i < dim; ++i) out[i] = x0.at(i);
            break;
        case Kind::Uniform:
            for (int i = 0; i < dim; ++i) out[i] = lo.at(i) + (hi.at(i) - lo.at(i)) * rng.uniform();
            break;
        case Kind::TwoPoint: {
            const bool first = rng.uniform() < p;
            for (int i = 0; i < dim; ++i) out[i] = first ? x0.at(i) : x1.at(i);
            break;
        }
    }
}

double InitialLaw::support_radius() const {
    auto norm_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    switch (kind) {
        case Kind::Point:
            return norm_of(x0);
        case Kind::TwoPoint:
            return std::max(norm_of(x0), norm_of(x1));
        case Kind::Uniform: {
            double s = 0.0;
            for (std::size_t i = 0; i < lo.size(); ++i)
                s += std::max(lo[i] * lo[i], hi[i] * hi[i]);
            return std::sqrt(s);
        }
    }
    return 0.0;
}

double ModelCoefficients::sigma_sup_abs() const {
    double m = 0.0;
    for (double v : sigma_tensor) m = std::max(m, std::abs(v));
    return m;
}

// --------------------------------------------------------------------------
// RunningCostSpec
// --------------------------------------------------------------------------

RunningCostSpec RunningCostSpec::quadratic(int dim, double q) {
    RunningCostSpec ell;
    ell.kind = Kind::Quadratic;
    ell.Q = q * Eigen::MatrixXd::Identity(dim, dim);
    ell.lin = Eigen::VectorXd::Zero(dim);
    ell.strong_convexity = q;
    ell.hessian_bound = q;
    ell.ell0_bound = 0.0;
    return ell;
}

double RunningCostSpec::value(double, const Eigen::VectorXd& psi) const {
    if (kind == Kind::Abs) return psi.norm();
    return 0.5 * psi.dot(Q * psi) + lin.dot(psi);
}

Eigen::VectorXd RunningCostSpec::grad(double, const Eigen::VectorXd& psi) const {
    if (kind == Kind::Abs) {
        const double n = psi.norm();
        return n > 1e-14 ? Eigen::VectorXd(psi / n) : Eigen::VectorXd::Zero(psi.size());
    }
    return Q * psi + lin;
}

// --------------------------------------------------------------------------
// Scalar fields and kernels
// --------------------------------------------------------------------------

double ScalarFieldSpec::value(const double* x, int dim) const {
    double dot = 0.0;
    for (int i = 0; i < dim; ++i) dot += direction.at(i) * x[i];
    switch (kind) {
        case Kind::Tanh:
            return scale * std::tanh(dot + shift);
        case Kind::Sin:
            return scale * std::sin(dot + shift);
        case Kind::Gauss: {
            double n2 = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double d = x[i] - direction.at(i);
                n2 += d * d;
            }
            const double w = shift > 0.0 ? shift : 1.0;
            return scale * std::exp(-0.5 * n2 / (w * w));
        }
    }
    return 0.0;
}

void ScalarFieldSpec::grad(const double* x, int dim, double* out) const {
    switch (kind) {
        case Kind::Tanh: {
            double dot = 0.0;
            for (int i = 0; i < dim; ++i) dot += direction.at(i) * x[i];
            const double c = std::cosh(dot + shift);
            const double d = scale / (c * c);
            for (int i = 0; i < dim; ++i) out[i] = d * direction[i];
            return;
        }
        case Kind::Sin: {
            double dot = 0.0;
            for (int i = 0; i < dim; ++i) dot += direction.at(i) * x[i];
            const double d = scale * std::cos(dot + shift);
            for (int i = 0; i < dim; ++i) out[i] = d * direction[i];
            return;
        }
        case Kind::Gauss: {
            const double v = value(x, dim);
            const double w = shift > 0.0 ? shift : 1.0;
            for (int i = 0; i < dim; ++i) out[i] = -v * (x[i] - direction.at(i)) / (w * w);
            return;
        }
    }
}

double KernelSpec::value(const double* x, const double* y, int dim) const {
    switch (kind) {
        case Kind::NegPhiPhi:
            return -scale * phi.value(x, dim) * phi.value(y, dim);
        case Kind::PosPhiPhi:
            return scale * phi.value(x, dim) * phi.value(y, dim);
        case Kind::Antisym:
            return scale * (phi.value(x, dim) * psi.value(y, dim) -
                            psi.value(x, dim) * phi.value(y, dim));
        case Kind::Constant:
            return scale;
    }
    return 0.0;
}

void KernelSpec::grad_x(const double* x, const double* y, int dim, double* out) const {
    std::vector<double> gphi(dim), gpsi(dim);
    switch (kind) {
        case Kind::NegPhiPhi: {
            phi.grad(x, dim, gphi.data());
            const double v = phi.value(y, dim);
            for (int i = 0; i < dim; ++i) out[i] = -scale * gphi[i] * v;
            return;
        }
        case Kind::PosPhiPhi: {
            phi.grad(x, dim, gphi.data());
            const double v = phi.value(y, dim);
            for (int i = 0; i < dim; ++i) out[i] = scale * gphi[i] * v;
            return;
        }
        case Kind::Antisym: {
            phi.grad(x, dim, gphi.data());
            psi.grad(x, dim, gpsi.data());
            const double vphi = phi.value(y, dim), vpsi = psi.value(y, dim);
            for (int i = 0; i < dim; ++i)
                out[i] = scale * (gphi[i] * vpsi - gpsi[i] * vphi);
            return;
        }
        case Kind::Constant:
            for (int i = 0; i < dim; ++i) out[i] = 0.0;
            return;
    }
}

// --------------------------------------------------------------------------
// TerminalCostSpec
// --------------------------------------------------------------------------

TerminalCostSpec TerminalCostSpec::quadratic(int dim, double lambda, double kappa) {
    TerminalCostSpec g;
    g.kind = Kind::Quadratic;
    g.dim = dim;
    g.lambda = lambda;
    g.kappa = kappa;
    return g;
}

TerminalCostSpec TerminalCostSpec::constant(int dim, double value) {
    TerminalCostSpec g;
    g.kind = Kind::Constant;
    g.dim = dim;
    g.c0 = value;
    return g;
}

TerminalContext TerminalCostSpec::context(const WeightedMeasure& mu) const {
    TerminalContext ctx;
    ctx.mass = mu.total_mass();
    ctx.mean = mu.mean();
    if (ctx.mean.size() == 0) ctx.mean = Eigen::VectorXd::Zero(dim);
    if (kind == Kind::Kernel) {
        for (int i = 0; i < mu.size(); ++i) {
            ctx.phi_integral += mu.weights[i] * kernel.phi.value(mu.point(i), dim);
            if (kernel.kind == KernelSpec::Kind::Antisym)
                ctx.psi_integral += mu.weights[i] * kernel.psi.value(mu.point(i), dim);
        }
    }
    return ctx;
}

namespace {

double bump_value(TerminalCostSpec::Bump bump, double lambda, const double* x, int dim) {
    double n2 = 0.0;
    for (int i = 0; i < dim; ++i) n2 += x[i] * x[i];
    switch (bump) {
        case TerminalCostSpec::Bump::Quadratic:
            return 0.5 * lambda * n2;
        case TerminalCostSpec::Bump::SqrtQuadratic:
            return lambda * std::sqrt(1.0 + n2);
        case TerminalCostSpec::Bump::None:
            return 0.0;
    }
    return 0.0;
}

void bump_grad(TerminalCostSpec::Bump bump, double lambda, const double* x, int dim, double* out) {
    double n2 = 0.0;
    for (int i = 0; i < dim; ++i) n2 += x[i] * x[i];
    switch (bump) {
        case TerminalCostSpec::Bump::Quadratic:
            for (int i = 0; i < dim; ++i) out[i] = lambda * x[i];
            return;
        case TerminalCostSpec::Bump::SqrtQuadratic: {
            const double d = lambda / std::sqrt(1.0 + n2);
            for (int i = 0; i < dim; ++i) out[i] = d * x[i];
            return;
        }
        case TerminalCostSpec::Bump::None:
            for (int i = 0; i < dim; ++i) out[i] = 0.0;
            return;
    }
}

}  // namespace

double TerminalCostSpec::value(const double* x, const TerminalContext& ctx) const {
    switch (kind) {
        case Kind::Constant:
            return c0;
        case Kind::Quadratic: {
            double n2 = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double d = x[i] - kappa * ctx.mean[i];
                n2 += d * d;
            }
            return 0.5 * lambda * n2 + c0;
        }
        case Kind::SqrtQuadratic: {
            double n2 = 0.0;
            for (int i = 0; i < dim; ++i) n2 += x[i] * x[i];
            return lambda * std::sqrt(1.0 + n2) + c0;
        }
        case Kind::Kernel: {
            double v = bump_value(bump, lambda, x, dim) + c0;
            switch (kernel.kind) {
                case KernelSpec::Kind::NegPhiPhi:
                    v += -kernel.scale * kernel.phi.value(x, dim) * ctx.phi_integral;
                    break;
                case KernelSpec::Kind::PosPhiPhi:
                    v += kernel.scale * kernel.phi.value(x, dim) * ctx.phi_integral;
                    break;
                case KernelSpec::Kind::Antisym:
                    v += kernel.scale * (kernel.phi.value(x, dim) * ctx.psi_integral -
                                         kernel.psi.value(x, dim) * ctx.phi_integral);
                    break;
                case KernelSpec::Kind::Constant:
                    v += kernel.scale * ctx.mass;
                    break;
            }
            return v;
        }
    }
    return 0.0;
}

void TerminalCostSpec::grad_x(const double* x, const TerminalContext& ctx, double* out) const {
    switch (kind) {
        case Kind::Constant:
            for (int i = 0; i < dim; ++i) out[i] = 0.0;
            return;
        case Kind::Quadratic:
            for (int i = 0; i < dim; ++i) out[i] = lambda * (x[i] - kappa * ctx.mean[i]);
            return;
        case Kind::SqrtQuadratic: {
            bump_grad(Bump::SqrtQuadratic, lambda, x, dim, out);
            return;
        }
        case Kind::Kernel: {
            bump_grad(bump, lambda, x, dim, out);
            std::vector<double> g(dim);
            switch (kernel.kind) {
                case KernelSpec::Kind::NegPhiPhi:
                    kernel.phi.grad(x, dim, g.data());
                    for (int i = 0; i < dim; ++i) out[i] += -kernel.scale * g[i] * ctx.phi_integral;
                    return;
                case KernelSpec::Kind::PosPhiPhi:
                    kernel.phi.grad(x, dim, g.data());
                    for (int i = 0; i < dim; ++i) out[i] += kernel.scale * g[i] * ctx.phi_integral;
                    return;
                case KernelSpec::Kind::Antisym: {
                    std::vector<double> gp(dim);
                    kernel.phi.grad(x, dim, g.data());
                    kernel.psi.grad(x, dim, gp.data());
                    for (int i = 0; i < dim; ++i)
                        out[i] += kernel.scale * (g[i] * ctx.psi_integral - gp[i] * ctx.phi_integral);
                    return;
                }
                case KernelSpec::Kind::Constant:
                    return;
            }
        }
    }
}

bool TerminalCostSpec::mean_field_free() const {
    switch (kind) {
        case Kind::Constant:
        case Kind::SqrtQuadratic:
            return true;
        case Kind::Quadratic:
            return kappa == 0.0;
        case Kind::Kernel:
            return false;
    }
    return false;
}

bool TerminalCostSpec::has_decomposition() const {
    if (mean_field_free()) return true;       // g1 = 0
    if (kind == Kind::Kernel) return true;    // bounded fields
    return false;                             // mean interaction has linear g1
}

double TerminalCostSpec::g1(const double* x, const TerminalContext& ctx) const {
    if (mean_field_free()) return 0.0;
    if (kind == Kind::Kernel) return value(x, ctx) - bump_value(bump, lambda, x, dim) - c0;
    // quadratic mean interaction: difference from the kappa = 0 cost
    double n2 = 0.0, base = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = x[i] - kappa * ctx.mean[i];
        n2 += d * d;
        base += x[i] * x[i];
    }
    return 0.5 * lambda * (n2 - base);
}

// --------------------------------------------------------------------------
// Fundamental matrix
// --------------------------------------------------------------------------

GammaMatrix fundamental_matrix(const ModelCoefficients& coeffs, const TimeGrid& grid,
                               double condition_threshold) {
    const int n = coeffs.state_dim;
    GammaMatrix out;
    out.grid = grid;
    out.value.reserve(grid.n_nodes());
    out.inverse.reserve(grid.n_nodes());
    Eigen::MatrixXd G = Eigen::MatrixXd::Identity(n, n);
    const double dt = grid.dt();
    auto rhs = [&](double t, const Eigen::MatrixXd& g) { return coeffs.b.eval(t) * g; };
    for (int k = 0;; ++k) {
        Eigen::MatrixXd inv;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
        if (!lu.isInvertible())
            throw std::runtime_error("fundamental_matrix: Gamma not invertible at node " +
                                     std::to_string(k));
        inv = lu.inverse();
        const double cond = G.cwiseAbs().rowwise().sum().maxCoeff() *
                            inv.cwiseAbs().rowwise().sum().maxCoeff();
        if (cond > condition_threshold)
            throw std::runtime_error("fundamental_matrix: conditioning " + std::to_string(cond) +
                                     " exceeds threshold");
        out.max_condition = std::max(out.max_condition, cond);
        out.sup_norm = std::max(out.sup_norm, G.cwiseAbs().maxCoeff());
        out.sup_norm_inverse = std::max(out.sup_norm_inverse, inv.cwiseAbs().maxCoeff());
        out.value.push_back(G);
        out.inverse.push_back(inv);
        if (k == grid.n_steps) break;
        const double t = grid.node(k);
        const Eigen::MatrixXd k1 = rhs(t, G);
        const Eigen::MatrixXd k2 = rhs(t + 0.5 * dt, G + 0.5 * dt * k1);
        const Eigen::MatrixXd k3 = rhs(t + 0.5 * dt, G + 0.5 * dt * k2);
        const Eigen::MatrixXd k4 = rhs(t + dt, G + dt * k3);
        G += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return out;
}

// --------------------------------------------------------------------------
// validate_model
// --------------------------------------------------------------------------

namespace {

std::string witness_str(const char* what, double got, double bound) {
    std::ostringstream os;
    os << what << ": value " << got << " exceeds bound " << bound;
    return os.str();
}

void require_finite(double v, const char* what) {
    if (!std::isfinite(v))
        throw std::invalid_argument(std::string("validate_model: non-finite evaluation in ") + what);
}

}  // namespace

AssumptionReport validate_model(const ModelCoefficients& coeffs, const DriverSpec& driver,
                                const RunningCostSpec& ell, const TerminalCostSpec& g,
                                int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("validate_model: n_samples >= 1 required");
    const int n = coeffs.state_dim;
    const int d = coeffs.noise_dim;
    const double T = coeffs.horizon;
    const double L = coeffs.bound_L;
    AssumptionReport rep;
    auto violate = [&](const std::string& id, const std::string& desc) {
        rep.violations.push_back({id, desc});
    };

    // A1/A2: coefficient sup norms and volatility structure
    const double box = 3.0;  // sampling box half-width
    {
        const double sup_a = coeffs.a.sup_abs(T), sup_b = coeffs.b.sup_abs(T),
                     sup_c = coeffs.c.sup_abs(T), sup_nu = coeffs.nu.sup_abs(T),
                     sup_sig = coeffs.sigma_sup_abs();
        require_finite(sup_a + sup_b + sup_c + sup_nu + sup_sig, "coefficients");
        if (sup_a > L + 1e-12) violate("A1", witness_str("sup|a|", sup_a, L));
        if (sup_b > L + 1e-12) violate("A1", witness_str("sup|b|", sup_b, L));
        if (sup_c > L + 1e-12) violate("A1", witness_str("sup|c|", sup_c, L));
        if (sup_nu > L + 1e-12) violate("A2", witness_str("sup|nu|", sup_nu, L));
        if (sup_sig > L + 1e-12) violate("A2", witness_str("sup|sigma|", sup_sig, L));
        if (coeffs.r_flag == 0 && sup_sig > 0.0)
            violate("A2", "r = 0 requires sigma tensor identically zero");
        if (!std::isfinite(coeffs.initial_law.support_radius()))
            throw std::invalid_argument("validate_model: unbounded initial law");
    }

    // A3: driver convexity and growth on sampled points
    {
        const double t_probe = 0.5 * T;
        for (int s = 0; s < n_samples; ++s) {
            Eigen::VectorXd z1(driver.zdim), z2(driver.zdim);
            const double y1 = box * (2.0 * halton(seed + s, 2) - 1.0);
            const double y2 = box * (2.0 * halton(seed + s, 3) - 1.0);
            for (int j = 0; j < driver.zdim; ++j) {
                z1[j] = box * (2.0 * halton(seed + s, 5 + 2 * j) - 1.0);
                z2[j] = box * (2.0 * halton(seed + s, 7 + 2 * j) - 1.0);
            }
            const double f1 = driver.f(t_probe, y1, z1), f2 = driver.f(t_probe, y2, z2);
            require_finite(f1, "driver");
            require_finite(f2, "driver");
            const double fmid = driver.f(t_probe, 0.5 * (y1 + y2), Eigen::VectorXd(0.5 * (z1 + z2)));
            if (fmid > 0.5 * (f1 + f2) + 1e-9)
                violate("A3", "midpoint convexity of f fails at sampled pair " + std::to_string(s));
            const double growth =
                driver.f0_bound + driver.alpha * std::abs(y1) + 0.5 * driver.beta * z1.squaredNorm();
            if (f1 > growth + 1e-9)
                violate("A3", witness_str("driver growth f(y,z)", f1, growth));
        }
    }

    // A5: running cost strong convexity and bounds
    {
        StreamRng rng(seed, 0xa5);
        for (int s = 0; s < n_samples; ++s) {
            Eigen::VectorXd p1(n), p2(n);
            for (int j = 0; j < n; ++j) {
                p1[j] = box * (2.0 * halton(seed + s, 11 + 2 * j) - 1.0);
                p2[j] = box * (2.0 * halton(seed + s, 13 + 2 * j) - 1.0);
            }
            const double t_probe = T * rng.uniform();
            const Eigen::VectorXd dg = ell.grad(t_probe, p1) - ell.grad(t_probe, p2);
            const double lhs = dg.dot(p1 - p2);
            const double rhs = (p1 - p2).squaredNorm() / L;
            if (lhs < rhs - 1e-9)
                violate("A5", witness_str("gradient monotonicity of ell", lhs, rhs));
            const double at0 = std::abs(ell.value(t_probe, Eigen::VectorXd::Zero(n)));
            require_finite(at0, "running cost");
            if (at0 > L + 1e-12) violate("A5", witness_str("|ell(t,0)|", at0, L));
        }
    }

    // A6: fundamental matrix, gamma, and the small-time condition
    {
        const TimeGrid grid = TimeGrid::uniform(64, T);
        const GammaMatrix gm = fundamental_matrix(coeffs, grid);
        rep.gamma_norm = gm.sup_norm;
        rep.gamma_inverse_norm = gm.sup_norm_inverse;
        const double sup_nu = coeffs.nu.sup_abs(T);
        const double sup_sig = coeffs.sigma_sup_abs();
        const double ml = std::max(1.0, L);
        const double eat = std::exp(driver.alpha * T);
        rep.gamma = 8.0 * driver.beta * ml * eat * gm.sup_norm * gm.sup_norm_inverse *
                    (sup_nu + 12.0 * ml * eat * sup_sig);
        if (coeffs.r_flag == 0) {
            rep.small_time_value = 4.0 * driver.beta * eat * L * gm.sup_norm * gm.sup_norm *
                                   gm.sup_norm_inverse * gm.sup_norm_inverse * sup_nu * sup_nu * T;
            rep.small_time_ok = rep.small_time_value < 1.0;
            if (!rep.small_time_ok)
                violate("A6", witness_str("small-time condition", rep.small_time_value, 1.0));
        }
    }

    // A7/A8: terminal cost convexity and growth, uniformly over probe measures
    {
        const double r = coeffs.r_flag;
        const double mass_cap = std::exp(driver.alpha * T);
        for (int probe = 0; probe < 3; ++probe) {
            WeightedMeasure mu;
            mu.dim = n;
            const int m = 16;
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j)
                    mu.points.push_back(2.0 * box * (halton(seed + probe * m + i, 2 + j) - 0.5));
                mu.weights.push_back(mass_cap / m * (probe == 0 ? 1.0 : 0.5 + 0.5 * probe / 3.0));
            }
            const TerminalContext ctx = g.context(mu);
            bool superlinear_r1 = false;
            for (int s = 0; s < n_samples; ++s) {
                Eigen::VectorXd x1(n), x2(n);
                for (int j = 0; j < n; ++j) {
                    x1[j] = 2.0 * box * (2.0 * halton(seed + s, 17 + 2 * j) - 1.0);
                    x2[j] = 2.0 * box * (2.0 * halton(seed + s, 19 + 2 * j) - 1.0);
                }
                const double g1v = g.value(x1.data(), ctx), g2v = g.value(x2.data(), ctx);
                require_finite(g1v, "terminal cost");
                const Eigen::VectorXd xm = 0.5 * (x1 + x2);
                if (g.value(xm.data(), ctx) > 0.5 * (g1v + g2v) + 1e-9)
                    violate("A7", "midpoint convexity of g fails at sampled pair " +
                                      std::to_string(s));
                const double nx = x1.norm();
                const double upper = L * (1.0 + std::pow(nx, 2.0 - r));
                const double lower = -L * (1.0 + nx);
                const std::string id = probe == 0 ? "A7" : "A8";
                if (g1v > upper + 1e-9) {
                    violate(id, witness_str("terminal growth g", g1v, upper));
                    if (coeffs.r_flag == 1 && g1v > 4.0 * L * (1.0 + nx)) superlinear_r1 = true;
                }
                if (g1v < lower - 1e-9) violate(id, witness_str("terminal lower bound -g", -g1v, -lower));
                std::vector<double> grad(n);
                g.grad_x(x1.data(), ctx, grad.data());
                double gn = 0.0;
                for (double v : grad) gn += v * v;
                gn = std::sqrt(gn);
                if (gn > L * (1.0 + std::pow(nx, 1.0 - r)) + 1e-9)
                    violate(id, witness_str("terminal gradient growth", gn,
                                            L * (1.0 + std::pow(nx, 1.0 - r))));
            }
            if (superlinear_r1)
                throw std::invalid_argument(
                    "validate_model: r = 1 with superlinear terminal growth violates A7");
        }
    }

    // A9: decomposition needed by the finite-player experiments
    if (!g.has_decomposition())
        violate("A9", "terminal cost lacks a bounded Lipschitz mean-field decomposition");

    return rep;
}

}  // namespace rmfg
