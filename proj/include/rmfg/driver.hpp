#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace rmfg {

// Extended-real result of a Fenchel transform. The transform is +infinity
// outside the effective domain (|y*| > alpha), and that state is carried
// explicitly rather than through a float sentinel.
struct DualValue {
    double value = 0.0;
    bool infinite = false;
    bool converged = true;  // false: inner maximization hit its cap; value is a lower bound
};

// BSDE driver f(t, y, z), convex in (y, z).
//
// kind QuadraticBenchmark means f = weight/2 |z|^2 (weight 1 is the
// benchmark itself; other weights arise from entropy rescaling). Custom
// drivers come from a named catalogue with analytic gradients.
struct DriverSpec {
    enum class Kind { QuadraticBenchmark, Custom };

    Kind kind = Kind::QuadraticBenchmark;
    double weight = 1.0;        // quadratic kinds: f = weight/2 |z|^2
    std::string name;           // custom catalogue: quartic, quad_quartic, smooth_abs_y
    int zdim = 1;
    double alpha = 0.0;         // growth bound on the y slope
    double beta = 1.0;          // growth bound on the z curvature
    double f0_bound = 0.0;
    double second_deriv_bound = 1.0;
    double smooth = 0.25;       // smoothing scale for smooth_abs_y
    double entropy_scale = 1.0; // s: effective driver is s * f(y/s, z/s)

    static DriverSpec quadratic_benchmark(int zdim = 1);
    static DriverSpec custom(const std::string& name, int zdim, double alpha = 0.0,
                             double beta = 1.0);

    bool is_quadratic() const { return kind == Kind::QuadraticBenchmark; }

    double f(double t, double y, const Eigen::VectorXd& z) const;
    double df_dy(double t, double y, const Eigen::VectorXd& z) const;
    Eigen::VectorXd df_dz(double t, double y, const Eigen::VectorXd& z) const;

    // Fenchel transform of f in (y, z); analytic where the catalogue allows,
    // otherwise damped Newton with multistart and a grid fallback.
    DualValue f_star(double t, double y_star, const Eigen::VectorXd& z_star) const;

    // Driver of the equivalent unit-penalty game when the entropy weight is
    // gamma: f_scaled(y, z) = gamma f(y / gamma, z / gamma). Its transform is
    // gamma f*(y*, z*).
    DriverSpec scaled(double gamma) const;
};

DualValue fenchel_dual(const DriverSpec& driver, double t, double y_star,
                       const Eigen::VectorXd& z_star);

// Largest c such that
//   f*(theta p1 + (1-theta) p2) <= theta f*(p1) + (1-theta) f*(p2)
//                                  - c theta (1-theta) |p1 - p2|^2
// holds across the sampled dual pairs. Pairs at zero distance are skipped.
struct ConvexityMargin {
    double c = 0.0;
    bool empty_sample = false;
};
ConvexityMargin strict_convexity_margin(const DriverSpec& driver,
                                        const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs,
                                        double theta);

}  // namespace rmfg
