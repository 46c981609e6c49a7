#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "doctest.h"
#include "rmfg/measure.hpp"
#include "rmfg/rng.hpp"

using namespace rmfg;

namespace {

// Grid oracle for the 1-D dual LP: discretizes phi on [-1,1] and applies the
// sliding-window recursion directly. Inner-approximates the feasible set, so
// it lower-bounds the exact value by at most a few grid cells.
double fm_grid_oracle(const std::vector<double>& pos, const std::vector<double>& w, int G) {
    const double dphi = 2.0 / (G - 1);
    std::vector<double> dp(G), next(G);
    for (int g = 0; g < G; ++g) dp[g] = w[0] * (-1.0 + g * dphi);
    for (std::size_t j = 1; j < pos.size(); ++j) {
        const int radius = static_cast<int>(std::floor((pos[j] - pos[j - 1]) / dphi + 1e-9));
        // monotone deque sliding-window maximum
        std::deque<int> q;
        for (int g = 0; g < G + radius; ++g) {
            if (g < G) {
                while (!q.empty() && dp[q.back()] <= dp[g]) q.pop_back();
                q.push_back(g);
            }
            const int center = g - radius;
            if (center >= 0) {
                while (q.front() < center - radius) q.pop_front();
                next[center] = dp[q.front()] + w[j] * (-1.0 + center * dphi);
            }
        }
        dp.swap(next);
    }
    return *std::max_element(dp.begin(), dp.end());
}

WeightedMeasure random_cloud(StreamRng& rng, int m, double spread, double mass_scale) {
    WeightedMeasure mu;
    mu.dim = 1;
    for (int i = 0; i < m; ++i) {
        mu.points.push_back(spread * rng.normal());
        mu.weights.push_back(mass_scale * (0.2 + rng.uniform()));
    }
    return mu;
}

double fm_of(const WeightedMeasure& a, const WeightedMeasure& b) {
    return fm_distance(a, b).value;
}

}  // namespace

TEST_CASE("fm: dirac pairs follow min(2, |x-y|)") {
    auto d = [](double x, double y) {
        return fm_of(WeightedMeasure::dirac(Eigen::VectorXd::Constant(1, x)),
                     WeightedMeasure::dirac(Eigen::VectorXd::Constant(1, y)));
    };
    CHECK(d(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d(0.0, 5.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d(0.0, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(d(2.0, 2.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fm: mass difference at a shared atom") {
    const auto x = Eigen::VectorXd::Constant(1, 0.7);
    const auto a = WeightedMeasure::dirac(x, 1.4);
    const auto b = WeightedMeasure::dirac(x, 0.9);
    CHECK(fm_of(a, b) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fm: identical clouds give zero") {
    StreamRng rng(11, 0);
    const auto mu = random_cloud(rng, 40, 1.0, 1.0 / 40);
    CHECK(fm_of(mu, mu) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fm: exact sweep matches the grid oracle on random instances") {
    StreamRng rng(17, 3);
    for (int trial = 0; trial < 30; ++trial) {
        const int m = 2 + static_cast<int>(rng.uniform_index(25));
        std::vector<double> pos(m), w(m);
        for (int i = 0; i < m; ++i) {
            pos[i] = 3.0 * (2.0 * rng.uniform() - 1.0);
            w[i] = 2.0 * rng.normal() / m;
        }
        std::sort(pos.begin(), pos.end());
        const double exact = fm_exact_1d(pos, w);
        const double oracle = fm_grid_oracle(pos, w, 16001);
        double wsum = 0.0;
        for (double v : w) wsum += std::abs(v);
        CHECK(std::abs(exact - oracle) <= 2e-3 * std::max(1.0, wsum) + 1e-9);
        CHECK(exact >= oracle - 1e-9);  // oracle inner-approximates
    }
}

TEST_CASE("fm: exact sweep agrees with min-cost flow") {
    StreamRng rng(23, 7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mu = random_cloud(rng, 3 + static_cast<int>(rng.uniform_index(12)), 1.5, 0.1);
        const auto nu = random_cloud(rng, 3 + static_cast<int>(rng.uniform_index(12)), 1.5, 0.1);
        const double sweep = fm_of(mu, nu);
        const double flow = fm_flow(mu, nu);
        CHECK(sweep == doctest::Approx(flow).epsilon(1e-7));
    }
}

TEST_CASE("fm: pseudometric properties on random triples") {
    StreamRng rng(31, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_cloud(rng, 10, 1.0, 0.1);
        const auto b = random_cloud(rng, 12, 1.2, 0.1);
        const auto c = random_cloud(rng, 8, 0.8, 0.1);
        const double ab = fm_of(a, b), ba = fm_of(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-11));
        const double ac = fm_of(a, c), cb = fm_of(c, b);
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("fm: blend distance scales linearly in the damping weight") {
    StreamRng rng(41, 2);
    const auto mu = random_cloud(rng, 30, 1.0, 1.0 / 30);
    const auto nu = random_cloud(rng, 30, 1.3, 1.0 / 30);
    const double full = fm_of(mu, nu);
    const auto half = mu.blend(nu, 0.5);
    CHECK(fm_of(mu, half) == doctest::Approx(0.5 * full).epsilon(1e-9));
}

TEST_CASE("fm: sliced estimate lower-bounds the flow value in 2-D") {
    StreamRng rng(53, 5);
    WeightedMeasure mu, nu;
    mu.dim = nu.dim = 2;
    for (int i = 0; i < 30; ++i) {
        mu.points.push_back(rng.normal());
        mu.points.push_back(rng.normal());
        mu.weights.push_back(1.0 / 30);
        nu.points.push_back(0.5 + rng.normal());
        nu.points.push_back(rng.normal());
        nu.weights.push_back(1.0 / 30);
    }
    const FmResult r = fm_distance(mu, nu);
    CHECK(r.method == FmMethod::Sliced);
    CHECK(r.value <= r.upper_bound + 1e-7);
    CHECK(r.upper_bound == doctest::Approx(fm_flow(mu, nu)).epsilon(1e-9));
}

TEST_CASE("resampled 1-D cloud stays FM-close with equalized weights") {
    StreamRng rng(61, 9);
    const auto mu = random_cloud(rng, 4000, 1.0, 1.0 / 4000);
    const auto red = mu.resampled(1000, 7);
    CHECK(red.size() == 1000);
    CHECK(red.total_mass() == doctest::Approx(mu.total_mass()).epsilon(1e-9));
    CHECK(fm_of(mu, red) < 0.02);
}
