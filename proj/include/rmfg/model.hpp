#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmfg/driver.hpp"
#include "rmfg/grid.hpp"
#include "rmfg/measure.hpp"
#include "rmfg/rng.hpp"

namespace rmfg {

// Deterministic matrix-valued function of time from a small catalogue.
struct TimeMatrixFn {
    enum class Kind { Constant, Affine, PiecewiseConstant };
    Kind kind = Kind::Constant;
    int rows = 1, cols = 1;
    std::vector<double> base;                  // row-major, rows*cols
    std::vector<double> slope;                 // affine only
    std::vector<double> knots;                 // piecewise only, ascending
    std::vector<std::vector<double>> pieces;   // piecewise values per interval

    static TimeMatrixFn constant(int rows, int cols, double v);
    static TimeMatrixFn constant(const Eigen::MatrixXd& m);
    static TimeMatrixFn zero(int rows, int cols) { return constant(rows, cols, 0.0); }

    Eigen::MatrixXd eval(double t) const;
    double sup_abs(double horizon, int samples = 65) const;
};

// Bounded-support initial distribution for the state.
struct InitialLaw {
    enum class Kind { Point, Uniform, TwoPoint };
    Kind kind = Kind::Point;
    std::vector<double> x0;       // point / two-point first atom
    std::vector<double> x1;       // two-point second atom
    std::vector<double> lo, hi;   // uniform box
    double p = 0.5;               // two-point probability of x0

    void sample(StreamRng& rng, double* out, int dim) const;
    double support_radius() const;
};

struct ModelCoefficients {
    int state_dim = 1;
    int noise_dim = 1;
    double horizon = 1.0;
    int r_flag = 0;
    double bound_L = 1.0;
    TimeMatrixFn a;                    // n x 1
    TimeMatrixFn b;                    // n x n
    TimeMatrixFn c;                    // n x n
    TimeMatrixFn nu;                   // n x d
    std::vector<double> sigma_tensor;  // constant n x d x n entries, zero when r_flag = 0
    InitialLaw initial_law;

    double sigma_entry(int i, int j, int k) const {
        if (sigma_tensor.empty()) return 0.0;
        return sigma_tensor[(static_cast<std::size_t>(i) * noise_dim + j) * state_dim + k];
    }
    double sigma_sup_abs() const;
};

// Running cost ell(t, psi): strongly convex catalogue.
struct RunningCostSpec {
    enum class Kind { Quadratic, Abs };
    Kind kind = Kind::Quadratic;
    Eigen::MatrixXd Q;       // quadratic: 0.5 psi^T Q psi + lin . psi
    Eigen::VectorXd lin;
    double strong_convexity = 1.0;  // 1/L
    double hessian_bound = 1.0;
    double ell0_bound = 0.0;

    static RunningCostSpec quadratic(int dim, double q = 1.0);

    double value(double t, const Eigen::VectorXd& psi) const;
    Eigen::VectorXd grad(double t, const Eigen::VectorXd& psi) const;
};

// Smooth bounded scalar field used inside interaction kernels.
struct ScalarFieldSpec {
    enum class Kind { Tanh, Gauss, Sin };
    Kind kind = Kind::Tanh;
    std::vector<double> direction;  // u
    double shift = 0.0;             // b; gauss: width
    double scale = 1.0;

    double value(const double* x, int dim) const;
    void grad(const double* x, int dim, double* out) const;
};

struct KernelSpec {
    enum class Kind { NegPhiPhi, PosPhiPhi, Antisym, Constant };
    Kind kind = Kind::NegPhiPhi;
    ScalarFieldSpec phi, psi;
    double scale = 1.0;

    double value(const double* x, const double* y, int dim) const;
    void grad_x(const double* x, const double* y, int dim, double* out) const;
};

// Per-measure cache so terminal-cost evaluations stay O(1) per point for the
// separable catalogue.
struct TerminalContext {
    double mass = 0.0;
    Eigen::VectorXd mean;
    double phi_integral = 0.0;
    double psi_integral = 0.0;
};

struct TerminalCostSpec {
    enum class Kind { Constant, Quadratic, SqrtQuadratic, Kernel };
    enum class Bump { None, Quadratic, SqrtQuadratic };

    Kind kind = Kind::Quadratic;
    int dim = 1;
    double lambda = 1.0;  // quadratic weight / bump weight
    double kappa = 0.0;   // mean-interaction strength: 0.5 lambda |x - kappa mean(mu)|^2
    double c0 = 0.0;      // constant offset
    Bump bump = Bump::None;
    KernelSpec kernel;

    static TerminalCostSpec quadratic(int dim, double lambda, double kappa = 0.0);
    static TerminalCostSpec constant(int dim, double value);

    TerminalContext context(const WeightedMeasure& mu) const;
    double value(const double* x, const TerminalContext& ctx) const;
    void grad_x(const double* x, const TerminalContext& ctx, double* out) const;

    // A9 decomposition g = g0(x) + g1(x, mu) with g1 bounded Lipschitz.
    bool has_decomposition() const;
    bool mean_field_free() const;  // g1 identically zero
    double g1(const double* x, const TerminalContext& ctx) const;
};

// One game instance: coefficients, driver, costs, entropy weight.
struct GameModel {
    ModelCoefficients coeffs;
    DriverSpec driver;
    RunningCostSpec ell;
    TerminalCostSpec g;
    double gamma = 1.0;  // entropy penalty weight in the objective
};

struct GammaMatrix {
    TimeGrid grid;
    std::vector<Eigen::MatrixXd> value;    // Gamma_t at nodes
    std::vector<Eigen::MatrixXd> inverse;  // Gamma_t^{-1}
    double sup_norm = 1.0;                 // max-abs entry over nodes
    double sup_norm_inverse = 1.0;
    double max_condition = 1.0;
};

GammaMatrix fundamental_matrix(const ModelCoefficients& coeffs, const TimeGrid& grid,
                               double condition_threshold = 1e12);

struct AssumptionViolation {
    std::string assumption;   // e.g. "A5"
    std::string description;  // sampled witness
};

struct AssumptionReport {
    double gamma = 0.0;                 // A6 formula value
    double gamma_norm = 1.0;            // sup |Gamma|
    double gamma_inverse_norm = 1.0;    // sup |Gamma^{-1}|
    bool small_time_ok = false;         // only meaningful when r_flag = 0
    double small_time_value = 0.0;
    std::vector<AssumptionViolation> violations;

    bool passed() const { return violations.empty(); }
};

AssumptionReport validate_model(const ModelCoefficients& coeffs, const DriverSpec& driver,
                                const RunningCostSpec& ell, const TerminalCostSpec& g,
                                int n_samples, std::uint64_t seed);

}  // namespace rmfg
