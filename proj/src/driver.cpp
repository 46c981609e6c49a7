#include "rmfg/driver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rmfg {

namespace {

// base (unscaled) custom catalogue

double base_f(const DriverSpec& d, double /*t*/, double y, const Eigen::VectorXd& z) {
    if (d.kind == DriverSpec::Kind::QuadraticBenchmark) return 0.5 * d.weight * z.squaredNorm();
    if (d.name == "quartic") return 0.25 * std::pow(z.squaredNorm(), 2.0);
    if (d.name == "quad_quartic")
        return 0.5 * z.squaredNorm() + 0.25 * std::pow(z.squaredNorm(), 2.0);
    if (d.name == "smooth_abs_y") {
        const double s = d.smooth;
        return 0.5 * z.squaredNorm() + d.alpha * s * std::log(std::cosh(y / s));
    }
    throw std::invalid_argument("unknown custom driver: " + d.name);
}

double base_df_dy(const DriverSpec& d, double /*t*/, double y, const Eigen::VectorXd&) {
    if (d.kind == DriverSpec::Kind::QuadraticBenchmark) return 0.0;
    if (d.name == "smooth_abs_y") return d.alpha * std::tanh(y / d.smooth);
    return 0.0;  // remaining catalogue entries do not depend on y
}

Eigen::VectorXd base_df_dz(const DriverSpec& d, double /*t*/, double, const Eigen::VectorXd& z) {
    if (d.kind == DriverSpec::Kind::QuadraticBenchmark) return d.weight * z;
    if (d.name == "quartic") return z.squaredNorm() * z;
    if (d.name == "quad_quartic") return z + z.squaredNorm() * z;
    if (d.name == "smooth_abs_y") return z;
    throw std::invalid_argument("unknown custom driver: " + d.name);
}

// analytic transform of the base driver, when available
bool base_f_star_analytic(const DriverSpec& d, double y_star, const Eigen::VectorXd& z_star,
                          DualValue& out) {
    const double r = z_star.norm();
    if (d.kind == DriverSpec::Kind::QuadraticBenchmark) {
        if (std::abs(y_star) > 1e-14) {
            out = {0.0, true, true};
        } else {
            out = {0.5 * r * r / d.weight, false, true};
        }
        return true;
    }
    if (d.name == "quartic") {
        if (std::abs(y_star) > 1e-14) {
            out = {0.0, true, true};
            return true;
        }
        out = {0.75 * std::pow(r, 4.0 / 3.0), false, true};
        return true;
    }
    if (d.name == "quad_quartic") {
        if (std::abs(y_star) > 1e-14) {
            out = {0.0, true, true};
            return true;
        }
        // radial maximizer solves m + m^3 = r
        double m = r / (1.0 + r * r);
        for (int it = 0; it < 60; ++it) {
            const double g = m + m * m * m - r;
            m -= g / (1.0 + 3.0 * m * m);
        }
        out = {r * m - 0.5 * m * m - 0.25 * m * m * m * m, false, true};
        return true;
    }
    if (d.name == "smooth_abs_y") {
        if (std::abs(y_star) > d.alpha) {
            out = {0.0, true, true};
            return true;
        }
        const double u = d.alpha > 0.0 ? y_star / d.alpha : 0.0;
        double ypart = 0.0;
        if (std::abs(u) >= 1.0 - 1e-12) {
            ypart = d.alpha * d.smooth * std::log(2.0);  // boundary limit
        } else if (d.alpha > 0.0) {
            const double at = std::atanh(u);
            ypart = d.smooth * (y_star * at + 0.5 * d.alpha * std::log(1.0 - u * u));
        }
        out = {0.5 * r * r + ypart, false, true};
        return true;
    }
    return false;
}

// Damped Newton on the concave inner problem sup <p,(y,z)> - f(y,z),
// three starts, grid fallback in dimension <= 2.
DualValue base_f_star_numeric(const DriverSpec& d, double t, double y_star,
                              const Eigen::VectorXd& z_star) {
    if (std::abs(y_star) > d.alpha + 1e-12) return {0.0, true, true};
    const int n = 1 + d.zdim;
    auto objective = [&](const Eigen::VectorXd& x) {
        const double y = x[0];
        const Eigen::VectorXd z = x.tail(d.zdim);
        return y_star * y + z_star.dot(z) - base_f(d, t, y, z);
    };
    auto gradient = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(n);
        const double y = x[0];
        const Eigen::VectorXd z = x.tail(d.zdim);
        g[0] = y_star - base_df_dy(d, t, y, z);
        g.tail(d.zdim) = z_star - base_df_dz(d, t, y, z);
        return g;
    };
    double best = -std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int start = 0; start < 3; ++start) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        if (start == 1) x.tail(d.zdim) = z_star;
        if (start == 2) {
            x[0] = 1.0;
            x.tail(d.zdim) = 0.5 * z_star;
        }
        bool ok = false;
        for (int it = 0; it < 200; ++it) {
            const Eigen::VectorXd g = gradient(x);
            if (g.norm() < 1e-11) {
                ok = true;
                break;
            }
            // finite-difference Hessian of f (small n)
            Eigen::MatrixXd H(n, n);
            const double h = 1e-5;
            for (int j = 0; j < n; ++j) {
                Eigen::VectorXd xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                H.col(j) = (gradient(xp) - gradient(xm)) / (2.0 * h);
            }
            Eigen::MatrixXd A = -H;
            for (int j = 0; j < n; ++j) A(j, j) += 1e-10;
            Eigen::VectorXd step = A.ldlt().solve(g);
            double lam = 1.0;
            const double f0 = objective(x);
            while (lam > 1e-8 && objective(x + lam * step) < f0) lam *= 0.5;
            x += lam * step;
        }
        best = std::max(best, objective(x));
        converged = converged || ok;
    }
    if (!converged && d.zdim <= 2) {
        // dense scan fallback
        const double R = 8.0;
        const int G = d.zdim == 1 ? 4001 : 201;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (int iy = 0; iy < 41; ++iy) {
            x[0] = -R + 2.0 * R * iy / 40.0;
            if (d.zdim == 1) {
                for (int iz = 0; iz < G; ++iz) {
                    x[1] = -R + 2.0 * R * iz / (G - 1.0);
                    best = std::max(best, objective(x));
                }
            } else {
                for (int iz = 0; iz < G; ++iz)
                    for (int iw = 0; iw < G; ++iw) {
                        x[1] = -R + 2.0 * R * iz / (G - 1.0);
                        x[2] = -R + 2.0 * R * iw / (G - 1.0);
                        best = std::max(best, objective(x));
                    }
            }
        }
        converged = true;
    }
    return {best, false, converged};
}

DualValue base_f_star(const DriverSpec& d, double t, double y_star, const Eigen::VectorXd& z_star) {
    DualValue out;
    if (base_f_star_analytic(d, y_star, z_star, out)) return out;
    return base_f_star_numeric(d, t, y_star, z_star);
}

}  // namespace

DriverSpec DriverSpec::quadratic_benchmark(int zdim) {
    DriverSpec d;
    d.kind = Kind::QuadraticBenchmark;
    d.zdim = zdim;
    d.alpha = 0.0;
    d.beta = 1.0;
    return d;
}

DriverSpec DriverSpec::custom(const std::string& name, int zdim, double alpha, double beta) {
    DriverSpec d;
    d.kind = Kind::Custom;
    d.name = name;
    d.zdim = zdim;
    d.alpha = alpha;
    d.beta = beta;
    return d;
}

double DriverSpec::f(double t, double y, const Eigen::VectorXd& z) const {
    const double s = entropy_scale;
    if (s == 1.0) return base_f(*this, t, y, z);
    return s * base_f(*this, t, y / s, Eigen::VectorXd(z / s));
}

double DriverSpec::df_dy(double t, double y, const Eigen::VectorXd& z) const {
    const double s = entropy_scale;
    if (s == 1.0) return base_df_dy(*this, t, y, z);
    return base_df_dy(*this, t, y / s, Eigen::VectorXd(z / s));
}

Eigen::VectorXd DriverSpec::df_dz(double t, double y, const Eigen::VectorXd& z) const {
    const double s = entropy_scale;
    if (s == 1.0) return base_df_dz(*this, t, y, z);
    return base_df_dz(*this, t, y / s, Eigen::VectorXd(z / s));
}

DualValue DriverSpec::f_star(double t, double y_star, const Eigen::VectorXd& z_star) const {
    DualValue v = base_f_star(*this, t, y_star, z_star);
    if (!v.infinite) v.value *= entropy_scale;
    return v;
}

DriverSpec DriverSpec::scaled(double gamma) const {
    if (!(gamma > 0.0)) throw std::invalid_argument("scaled: gamma must be positive");
    DriverSpec d = *this;
    d.entropy_scale = entropy_scale * gamma;
    d.beta = beta / gamma;
    d.f0_bound = f0_bound * gamma;
    return d;
}

DualValue fenchel_dual(const DriverSpec& driver, double t, double y_star,
                       const Eigen::VectorXd& z_star) {
    return driver.f_star(t, y_star, z_star);
}

ConvexityMargin strict_convexity_margin(
    const DriverSpec& driver,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs, double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument("strict_convexity_margin: theta must be in (0,1)");
    ConvexityMargin out;
    out.c = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& [p1, p2] : pairs) {
        const double dist2 = (p1 - p2).squaredNorm();
        if (dist2 <= 0.0) continue;  // degenerate pair
        const auto split = [&](const Eigen::VectorXd& p) {
            return std::make_pair(p[0], Eigen::VectorXd(p.tail(p.size() - 1)));
        };
        const auto [y1, z1] = split(p1);
        const auto [y2, z2] = split(p2);
        const DualValue f1 = driver.f_star(0.0, y1, z1);
        const DualValue f2 = driver.f_star(0.0, y2, z2);
        if (f1.infinite || f2.infinite)
            throw std::invalid_argument("strict_convexity_margin: pair outside the domain of f*");
        const Eigen::VectorXd pm = theta * p1 + (1.0 - theta) * p2;
        const auto [ym, zm] = split(pm);
        const DualValue fm = driver.f_star(0.0, ym, zm);
        const double gap = theta * f1.value + (1.0 - theta) * f2.value - fm.value;
        out.c = std::min(out.c, gap / (theta * (1.0 - theta) * dist2));
        any = true;
    }
    if (!any) {
        out.c = 0.0;
        out.empty_sample = true;
        return out;
    }
    out.c = std::max(out.c, 0.0);
    return out;
}

}  // namespace rmfg
