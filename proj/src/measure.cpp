#include "rmfg/measure.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rmfg/rng.hpp"

namespace rmfg {

double WeightedMeasure::total_mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

Eigen::VectorXd WeightedMeasure::moment_sum() const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j < dim; ++j) s[j] += weights[i] * point(i)[j];
    return s;
}

Eigen::VectorXd WeightedMeasure::mean() const {
    const double m = total_mass();
    if (m <= 0.0) return Eigen::VectorXd::Zero(dim);
    return moment_sum() / m;
}

double WeightedMeasure::moment(double p) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) {
        double n2 = 0.0;
        for (int j = 0; j < dim; ++j) n2 += point(i)[j] * point(i)[j];
        s += weights[i] * std::pow(n2, 0.5 * p);
    }
    return s;
}

WeightedMeasure WeightedMeasure::dirac(const Eigen::VectorXd& x, double mass) {
    WeightedMeasure m;
    m.dim = static_cast<int>(x.size());
    m.points.assign(x.data(), x.data() + x.size());
    m.weights.assign(1, mass);
    return m;
}

WeightedMeasure WeightedMeasure::from_samples(const std::vector<double>& pts, int dim) {
    WeightedMeasure m;
    m.dim = dim;
    m.points = pts;
    const int n = static_cast<int>(pts.size()) / dim;
    m.weights.assign(n, 1.0 / n);
    return m;
}

WeightedMeasure WeightedMeasure::blend(const WeightedMeasure& other, double a) const {
    if (dim != other.dim) throw std::invalid_argument("blend: dimension mismatch");
    WeightedMeasure out;
    out.dim = dim;
    out.points = points;
    out.points.insert(out.points.end(), other.points.begin(), other.points.end());
    out.weights.reserve(weights.size() + other.weights.size());
    for (double w : weights) out.weights.push_back((1.0 - a) * w);
    for (double w : other.weights) out.weights.push_back(a * w);
    return out;
}

WeightedMeasure WeightedMeasure::resampled(int m, std::uint64_t seed) const {
    if (m <= 0) throw std::invalid_argument("resampled: m must be positive");
    const double mass = total_mass();
    WeightedMeasure out;
    out.dim = dim;
    out.weights.assign(m, mass / m);
    out.points.resize(static_cast<std::size_t>(m) * dim);
    if (size() == 0 || mass <= 0.0) {
        std::fill(out.points.begin(), out.points.end(), 0.0);
        out.weights.assign(m, 0.0);
        return out;
    }
    std::vector<int> order(size());
    std::iota(order.begin(), order.end(), 0);
    if (dim == 1) {
        // quantile compression: deterministic, FM error O(range / m)
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return points[a] < points[b]; });
    }
    // systematic resampling over the (sorted in 1-D) weight sequence
    StreamRng rng(seed, 0x5e5ap16);
    const double u0 = (dim == 1) ? 0.5 : rng.uniform();
    double cum = 0.0;
    int idx = 0;
    for (int j = 0; j < m; ++j) {
        const double target = (j + u0) * mass / m;
        while (idx + 1 < size() && cum + weights[order[idx]] < target) {
            cum += weights[order[idx]];
            ++idx;
        }
        for (int c = 0; c < dim; ++c)
            out.points[static_cast<std::size_t>(j) * dim + c] = point(order[idx])[c];
    }
    return out;
}

void WeightedMeasure::save_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << "# schema=1\n";
    for (int j = 0; j < dim; ++j) f << "x" << j << ",";
    f << "weight\n";
    f.precision(17);
    for (int i = 0; i < size(); ++i) {
        for (int j = 0; j < dim; ++j) f << point(i)[j] << ",";
        f << weights[i] << "\n";
    }
}

WeightedMeasure WeightedMeasure::load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    WeightedMeasure m;
    m.dim = -1;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
        std::stringstream ss(line);
        std::vector<double> row;
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (m.dim < 0) m.dim = static_cast<int>(row.size()) - 1;
        for (int j = 0; j < m.dim; ++j) m.points.push_back(row[j]);
        m.weights.push_back(row.back());
    }
    if (m.dim < 1) throw std::runtime_error("empty measure file " + path);
    return m;
}

// ---------------------------------------------------------------------------
// Exact 1-D dual LP via a backward-free forward sweep over concave
// piecewise-linear value functions.
//
// State after processing atom j: f_j(phi) = max over feasible phi_1..phi_{j-1}
// of sum_{i<=j} w_i phi_i with phi_j = phi. Each f_j is concave piecewise
// linear on [-1,1]. The sweep alternates a sliding-window max of radius
// delta (which only widens the flat top) with adding the linear term w*phi
// (which shifts every slope by w and moves the top across breakpoints).
// Segments carry lengths and lazily-offset decline rates, so both updates
// are amortized cheap.
// ---------------------------------------------------------------------------

namespace {

struct Segment {
    double len;
    double decl;  // stored decline rate; effective = decl + side adder
};

class ConcaveSweep {
public:
    ConcaveSweep() : top_lo_(-1.0), top_hi_(1.0), value_(0.0) {}

    void widen_and_clip(double delta) {
        top_lo_ -= delta;
        top_hi_ += delta;
        if (top_lo_ < -1.0) {
            left_.clear();
            left_len_ = 0.0;
            top_lo_ = -1.0;
        } else {
            trim(left_, left_len_, top_lo_ + 1.0);
        }
        if (top_hi_ > 1.0) {
            right_.clear();
            right_len_ = 0.0;
            top_hi_ = 1.0;
        } else {
            trim(right_, right_len_, 1.0 - top_hi_);
        }
    }

    void add_linear(double w) {
        if (w == 0.0) return;
        if (w > 0.0) {
            left_add_ += w;
            right_add_ -= w;
            if (top_hi_ > top_lo_)
                push_front(left_, left_len_, {top_hi_ - top_lo_, w - left_add_});
            value_ += w * top_hi_;
            top_lo_ = top_hi_;
            pull_through(right_, right_len_, right_add_, left_, left_len_, left_add_, +1.0);
        } else {
            left_add_ += w;
            right_add_ -= w;
            if (top_hi_ > top_lo_)
                push_front(right_, right_len_, {top_hi_ - top_lo_, -w - right_add_});
            value_ += w * top_lo_;
            top_hi_ = top_lo_;
            pull_through(left_, left_len_, left_add_, right_, right_len_, right_add_, -1.0);
        }
    }

    double max_value() const { return value_; }

private:
    static void trim(std::deque<Segment>& side, double& side_len, double allowed) {
        while (side_len > allowed && !side.empty()) {
            const double excess = side_len - allowed;
            if (side.back().len <= excess + 1e-300) {
                side_len -= side.back().len;
                side.pop_back();
            } else {
                side.back().len -= excess;
                side_len = allowed;
            }
        }
    }

    static void push_front(std::deque<Segment>& side, double& side_len, Segment s) {
        if (s.len <= 0.0) return;
        side.push_front(s);
        side_len += s.len;
    }

    // Moves segments whose effective decline became non-positive from the
    // shrinking side across the top onto the growing side.
    void pull_through(std::deque<Segment>& from, double& from_len, double& from_add,
                      std::deque<Segment>& to, double& to_len, double& to_add,
                      double direction) {
        while (!from.empty()) {
            const double eff = from.front().decl + from_add;
            if (eff > 0.0) break;
            Segment seg = from.front();
            from.pop_front();
            from_len -= seg.len;
            value_ += (-eff) * seg.len;
            if (direction > 0.0) {
                top_hi_ += seg.len;
                top_lo_ = top_hi_;
            } else {
                top_lo_ -= seg.len;
                top_hi_ = top_lo_;
            }
            if (eff < 0.0) push_front(to, to_len, {seg.len, -eff - to_add});
            // eff == 0 would mean a flat stretch; fold it into the top
            if (eff == 0.0) {
                if (direction > 0.0) top_lo_ = top_hi_ - seg.len;
                else top_hi_ = top_lo_ + seg.len;
            }
        }
    }

    std::deque<Segment> left_, right_;
    double left_len_ = 0.0, right_len_ = 0.0;
    double left_add_ = 0.0, right_add_ = 0.0;
    double top_lo_, top_hi_;
    double value_;
};

}  // namespace

double fm_exact_1d(const std::vector<double>& positions, const std::vector<double>& weights) {
    const std::size_t m = positions.size();
    if (m != weights.size()) throw std::invalid_argument("fm_exact_1d: size mismatch");
    if (m == 0) return 0.0;
    ConcaveSweep sweep;
    sweep.add_linear(weights[0]);
    for (std::size_t j = 1; j < m; ++j) {
        const double delta = positions[j] - positions[j - 1];
        if (delta < -1e-12) throw std::invalid_argument("fm_exact_1d: positions not sorted");
        sweep.widen_and_clip(std::max(delta, 0.0));
        sweep.add_linear(weights[j]);
    }
    return sweep.max_value();
}

namespace {

double fm_1d_clouds(const std::vector<double>& xs_mu, const std::vector<double>& w_mu,
                    const std::vector<double>& xs_nu, const std::vector<double>& w_nu) {
    const std::size_t m = xs_mu.size() + xs_nu.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    auto pos = [&](std::size_t i) {
        return i < xs_mu.size() ? xs_mu[i] : xs_nu[i - xs_mu.size()];
    };
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pos(a) < pos(b); });
    std::vector<double> p(m), w(m);
    for (std::size_t k = 0; k < m; ++k) {
        p[k] = pos(order[k]);
        w[k] = order[k] < xs_mu.size() ? w_mu[order[k]] : -w_nu[order[k] - xs_mu.size()];
    }
    return fm_exact_1d(p, w);
}

// Min-cost flow (successive shortest augmenting paths, Bellman-Ford queue).
class MinCostFlow {
public:
    explicit MinCostFlow(int n) : head_(n, -1) {}

    void add_edge(int u, int v, double cap, double cost) {
        edges_.push_back({v, head_[u], cap, cost});
        head_[u] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({u, head_[v], 0.0, -cost});
        head_[v] = static_cast<int>(edges_.size()) - 1;
    }

    double solve(int s, int t) {
        const int n = static_cast<int>(head_.size());
        double total_cost = 0.0;
        while (true) {
            std::vector<double> dist(n, 1e300);
            std::vector<int> in_edge(n, -1);
            std::vector<bool> inq(n, false);
            std::deque<int> queue;
            dist[s] = 0.0;
            queue.push_back(s);
            while (!queue.empty()) {
                const int u = queue.front();
                queue.pop_front();
                inq[u] = false;
                for (int e = head_[u]; e >= 0; e = edges_[e].next) {
                    if (edges_[e].cap <= 1e-12) continue;
                    const int v = edges_[e].to;
                    const double nd = dist[u] + edges_[e].cost;
                    if (nd < dist[v] - 1e-12) {
                        dist[v] = nd;
                        in_edge[v] = e;
                        if (!inq[v]) {
                            inq[v] = true;
                            queue.push_back(v);
                        }
                    }
                }
            }
            if (in_edge[t] < 0) break;
            double push = 1e300;
            for (int v = t; v != s; v = edges_[in_edge[v] ^ 1].to)
                push = std::min(push, edges_[in_edge[v]].cap);
            if (push <= 1e-12) break;
            for (int v = t; v != s; v = edges_[in_edge[v] ^ 1].to) {
                edges_[in_edge[v]].cap -= push;
                edges_[in_edge[v] ^ 1].cap += push;
                total_cost += push * edges_[in_edge[v]].cost;
            }
        }
        return total_cost;
    }

private:
    struct Edge {
        int to, next;
        double cap, cost;
    };
    std::vector<int> head_;
    std::vector<Edge> edges_;
};

}  // namespace

double fm_flow(const WeightedMeasure& mu, const WeightedMeasure& nu) {
    const int np = mu.size(), nn = nu.size();
    // nodes: 0..np-1 surplus, np..np+nn-1 deficit, hub, source, sink
    const int hub = np + nn, s = hub + 1, t = hub + 2;
    MinCostFlow flow(t + 1);
    double mass_p = 0.0, mass_n = 0.0;
    for (int i = 0; i < np; ++i) {
        flow.add_edge(s, i, mu.weights[i], 0.0);
        flow.add_edge(i, hub, 1e300, 1.0);
        mass_p += mu.weights[i];
    }
    for (int j = 0; j < nn; ++j) {
        flow.add_edge(np + j, t, nu.weights[j], 0.0);
        flow.add_edge(hub, np + j, 1e300, 1.0);
        mass_n += nu.weights[j];
    }
    flow.add_edge(s, hub, mass_n, 0.0);
    flow.add_edge(hub, t, mass_p, 0.0);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < nn; ++j) {
            double d2 = 0.0;
            for (int c = 0; c < mu.dim; ++c) {
                const double diff = mu.point(i)[c] - nu.point(j)[c];
                d2 += diff * diff;
            }
            flow.add_edge(i, np + j, 1e300, std::min(std::sqrt(d2), 2.0));
        }
    return flow.solve(s, t);
}

FmResult fm_distance(const WeightedMeasure& mu, const WeightedMeasure& nu, const FmOptions& opts) {
    if (mu.dim != nu.dim) throw std::invalid_argument("fm_distance: dimension mismatch");
    FmResult res;
    if (mu.dim == 1) {
        if (mu.size() + nu.size() > opts.max_exact_support)
            throw std::runtime_error("fm_distance: merged support exceeds exact-method cap");
        std::vector<double> xm(mu.points), xn(nu.points);
        res.value = fm_1d_clouds(xm, mu.weights, xn, nu.weights);
        res.method = FmMethod::Exact1d;
        res.upper_bound = res.value;
        return res;
    }
    res.method = FmMethod::Sliced;
    StreamRng rng(opts.seed, 0xface);
    double acc = 0.0;
    for (int q = 0; q < opts.sliced_directions; ++q) {
        Eigen::VectorXd u(mu.dim);
        for (int c = 0; c < mu.dim; ++c) u[c] = rng.normal();
        const double nrm = u.norm();
        u = nrm > 0 ? Eigen::VectorXd(u / nrm) : Eigen::VectorXd::Unit(mu.dim, 0);
        std::vector<double> pm(mu.size()), pn(nu.size());
        for (int i = 0; i < mu.size(); ++i) {
            double dot = 0.0;
            for (int c = 0; c < mu.dim; ++c) dot += u[c] * mu.point(i)[c];
            pm[i] = dot;
        }
        for (int j = 0; j < nu.size(); ++j) {
            double dot = 0.0;
            for (int c = 0; c < nu.dim; ++c) dot += u[c] * nu.point(j)[c];
            pn[j] = dot;
        }
        acc += fm_1d_clouds(pm, mu.weights, pn, nu.weights);
    }
    res.value = acc / opts.sliced_directions;
    const WeightedMeasure mu_s = mu.size() > opts.subsample ? mu.resampled(opts.subsample, opts.seed) : mu;
    const WeightedMeasure nu_s = nu.size() > opts.subsample ? nu.resampled(opts.subsample, opts.seed + 1) : nu;
    res.upper_bound = fm_flow(mu_s, nu_s);
    return res;
}

}  // namespace rmfg
