#pragma once

#include <stdexcept>

namespace rmfg {

// Uniform time grid shared by all ensembles of one experiment.
struct TimeGrid {
    int n_steps = 1;
    double horizon = 1.0;

    static TimeGrid uniform(int n_steps, double horizon) {
        if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        return TimeGrid{n_steps, horizon};
    }

    double dt() const { return horizon / n_steps; }
    double node(int k) const { return k == n_steps ? horizon : k * dt(); }
    int n_nodes() const { return n_steps + 1; }
};

// Monte Carlo estimate with its standard error.
struct McValue {
    double mean = 0.0;
    double se = 0.0;
};

}  // namespace rmfg
