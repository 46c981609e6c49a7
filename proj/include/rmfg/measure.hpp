#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rmfg {

// Finite non-negative measure represented as a weighted particle cloud on R^n.
struct WeightedMeasure {
    int dim = 1;
    std::vector<double> points;   // [m][dim], row-major
    std::vector<double> weights;  // m non-negative weights

    int size() const { return static_cast<int>(weights.size()); }
    const double* point(int i) const { return points.data() + static_cast<std::size_t>(i) * dim; }

    double total_mass() const;
    Eigen::VectorXd mean() const;          // first moment / total mass
    Eigen::VectorXd moment_sum() const;    // un-normalized first moment
    double moment(double p) const;         // integral of |x|^p

    static WeightedMeasure dirac(const Eigen::VectorXd& x, double mass = 1.0);
    static WeightedMeasure from_samples(const std::vector<double>& pts, int dim);

    // Convex combination (1-a) * this + a * other as a union of clouds.
    WeightedMeasure blend(const WeightedMeasure& other, double a) const;

    // Reduces the cloud to m particles of equal weight (total mass preserved).
    // In 1-D this is deterministic quantile compression; otherwise systematic
    // resampling driven by the seed.
    WeightedMeasure resampled(int m, std::uint64_t seed) const;

    void save_csv(const std::string& path) const;
    static WeightedMeasure load_csv(const std::string& path);
};

enum class FmMethod { Exact1d, Sliced };

struct FmResult {
    double value = 0.0;       // exact in 1-D, sliced lower estimate otherwise
    FmMethod method = FmMethod::Exact1d;
    double upper_bound = 0.0; // flow bound on subsampled supports (dim >= 2)
};

struct FmOptions {
    int sliced_directions = 32;
    int subsample = 200;       // support size for the flow upper bound
    std::uint64_t seed = 0;
    int max_exact_support = 2'000'000;
};

// Fortet-Mourier (bounded-Lipschitz) distance between weighted clouds:
// sup of integral of phi d(mu - nu) over |phi| <= 1, Lip(phi) <= 1.
FmResult fm_distance(const WeightedMeasure& mu, const WeightedMeasure& nu,
                     const FmOptions& opts = {});

// Exact solver for the 1-D dual problem on a merged atom list:
// max sum w_i phi_i  s.t. |phi_i| <= 1, |phi_{i+1} - phi_i| <= x_{i+1} - x_i.
// Atoms must be sorted by position.
double fm_exact_1d(const std::vector<double>& positions, const std::vector<double>& weights);

// Exact value on a finite support via min-cost flow (any dimension).
// Intended for small supports; used as the upper-bound route and in tests.
double fm_flow(const WeightedMeasure& mu, const WeightedMeasure& nu);

}  // namespace rmfg
