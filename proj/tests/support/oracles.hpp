#pragma once

// Independent reference implementations used by unit and acceptance tests. None of
// them share code with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "dflsim/nn.hpp"
#include "dflsim/topology.hpp"

namespace oracle {

using dflsim::Label;
using dflsim::Matrix;
using dflsim::NodeId;
using dflsim::nn::ModelParams;

// ---- neural network -------------------------------------------------------

struct ForwardTrace {
    std::vector<Matrix> pre;  // pre-activations of every hidden layer, rows = samples
    Matrix probs;
};

// Straightforward per-sample forward pass with a max-shifted softmax.
inline ForwardTrace forward(const ModelParams& p, const Matrix& x) {
    ForwardTrace t;
    Matrix a = x;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        Matrix z(a.rows(), layer.weights.rows());
        for (Eigen::Index r = 0; r < a.rows(); ++r)
            for (Eigen::Index o = 0; o < layer.weights.rows(); ++o) {
                double s = layer.bias(o);
                for (Eigen::Index i = 0; i < layer.weights.cols(); ++i) s += layer.weights(o, i) * a(r, i);
                z(r, o) = s;
            }
        if (l + 1 < p.layers.size()) {
            t.pre.push_back(z);
            a = z.cwiseMax(0.0);
        } else {
            t.probs.resize(z.rows(), z.cols());
            for (Eigen::Index r = 0; r < z.rows(); ++r) {
                const double m = z.row(r).maxCoeff();
                double sum = 0;
                for (Eigen::Index c = 0; c < z.cols(); ++c) sum += std::exp(z(r, c) - m);
                for (Eigen::Index c = 0; c < z.cols(); ++c) t.probs(r, c) = std::exp(z(r, c) - m) / sum;
            }
        }
    }
    return t;
}

inline double loss(const ModelParams& p, const Matrix& x, std::span<const Label> y) {
    const auto t = oracle::forward(p, x);
    double s = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) s -= std::log(t.probs(r, y[static_cast<std::size_t>(r)]));
    return s / static_cast<double>(x.rows());
}

inline std::vector<bool> relu_pattern(const ModelParams& p, const Matrix& x) {
    std::vector<bool> out;
    for (const auto& z : oracle::forward(p, x).pre)
        for (Eigen::Index i = 0; i < z.size(); ++i) out.push_back(z.data()[i] > 0.0);
    return out;
}

struct GradCheck {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;  // entries whose perturbation crossed a ReLU kink
};

// Central differences over every parameter. relative error = |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradients(const ModelParams& params, const ModelParams& analytic, const Matrix& x,
                                 std::span<const Label> y, double h = 1e-5, double floor = 1e-6) {
    GradCheck out;
    ModelParams probe = params;
    auto visit = [&](double& slot, double grad) {
        const double orig = slot;
        slot = orig + h;
        const auto pattern_plus = oracle::relu_pattern(probe, x);
        const double lp = oracle::loss(probe, x, y);
        slot = orig - h;
        const auto pattern_minus = oracle::relu_pattern(probe, x);
        const double lm = oracle::loss(probe, x, y);
        slot = orig;
        if (pattern_plus != pattern_minus) {
            ++out.skipped_kinks;
            return;
        }
        const double numeric = (lp - lm) / (2 * h);
        const double denom = std::max({std::abs(grad), std::abs(numeric), floor});
        out.max_relative_error = std::max(out.max_relative_error, std::abs(grad - numeric) / denom);
        ++out.checked;
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& w = probe.layers[l].weights;
        for (Eigen::Index i = 0; i < w.size(); ++i) visit(w.data()[i], analytic.layers[l].weights.data()[i]);
        auto& b = probe.layers[l].bias;
        for (Eigen::Index i = 0; i < b.size(); ++i) visit(b(i), analytic.layers[l].bias(i));
    }
    return out;
}

// ---- graphs ---------------------------------------------------------------

// Undirected reachability by repeated boolean matrix squaring until fixpoint.
inline std::vector<std::vector<bool>> reachability(std::size_t n, const std::vector<dflsim::topo::Edge>& edges) {
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) r[i][i] = true;
    for (const auto& e : edges) r[e.src][e.dst] = r[e.dst][e.src] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (r[i][k] && r[k][j]) r[i][j] = true;
    return r;
}

inline std::vector<std::vector<NodeId>> components(std::size_t n, const std::vector<dflsim::topo::Edge>& edges) {
    const auto r = reachability(n, edges);
    std::vector<std::vector<NodeId>> out;
    std::vector<bool> placed(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (placed[i]) continue;
        std::vector<NodeId> comp;
        for (std::size_t j = 0; j < n; ++j)
            if (r[i][j]) {
                comp.push_back(static_cast<NodeId>(j));
                placed[j] = true;
            }
        out.push_back(comp);
    }
    return out;
}

inline std::size_t component_size_of(std::size_t n, const std::vector<dflsim::topo::Edge>& edges, std::size_t node) {
    const auto r = reachability(n, edges);
    return static_cast<std::size_t>(std::count(r[node].begin(), r[node].end(), true));
}

inline std::vector<std::vector<bool>> undirected_adjacency(std::size_t n, const std::vector<dflsim::topo::Edge>& edges) {
    std::vector<std::vector<bool>> a(n, std::vector<bool>(n, false));
    for (const auto& e : edges) a[e.src][e.dst] = a[e.dst][e.src] = true;
    return a;
}

inline dflsim::topo::SnapshotMetrics metrics(std::size_t n, const dflsim::topo::Snapshot& s) {
    dflsim::topo::SnapshotMetrics m;
    m.time_index = s.time_index;
    const auto a = undirected_adjacency(n, s.edges);
    std::size_t degree_sum = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) degree_sum += a[i][j] ? 1 : 0;
    m.avg_degree = static_cast<double>(degree_sum) / static_cast<double>(n);
    const auto comps = components(n, s.edges);
    m.component_count = comps.size();
    m.avg_component_size = static_cast<double>(n) / static_cast<double>(comps.size());
    for (const auto& c : comps) m.largest_component_size = std::max(m.largest_component_size, c.size());
    return m;
}

inline std::vector<dflsim::topo::NodeNetStats> node_stats(const dflsim::topo::TopologySeries& s) {
    const std::size_t n = s.node_count;
    std::vector<dflsim::topo::NodeNetStats> out(n);
    const double t = static_cast<double>(s.snapshots.size());
    for (std::size_t i = 0; i < n; ++i) {
        double in_deg = 0, cc = 0, connected = 0;
        for (const auto& snap : s.snapshots) {
            const auto a = undirected_adjacency(n, snap.edges);
            for (const auto& e : snap.edges) in_deg += e.dst == i ? 1 : 0;
            cc += static_cast<double>(component_size_of(n, snap.edges, i));
            bool any = false;
            for (std::size_t j = 0; j < n; ++j) any = any || (j != i && a[i][j]);
            connected += any ? 1 : 0;
        }
        out[i] = {in_deg / t, cc / t, connected / t};
    }
    return out;
}

inline Matrix adjacency(const dflsim::topo::TopologySeries& s) {
    const auto n = static_cast<Eigen::Index>(s.node_count);
    Matrix sum = Matrix::Zero(n, n);
    for (const auto& snap : s.snapshots) {
        Matrix ind = Matrix::Zero(n, n);
        for (const auto& e : snap.edges) ind(e.src, e.dst) = 1.0;
        sum += ind;
    }
    return sum / static_cast<double>(s.snapshots.size());
}

// ---- correlation ----------------------------------------------------------

using HighPrecision = boost::multiprecision::cpp_bin_float_50;

inline HighPrecision hp_pearson(const std::vector<HighPrecision>& x, const std::vector<HighPrecision>& y) {
    const auto n = static_cast<long>(x.size());
    HighPrecision mx = 0, my = 0;
    for (long i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    HighPrecision sxy = 0, sxx = 0, syy = 0;
    for (long i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / boost::multiprecision::sqrt(sxx * syy);
}

inline std::vector<HighPrecision> to_hp(std::span<const double> v) { return {v.begin(), v.end()}; }

// Mean rank by counting: 1 + #smaller + (#equal - 1) / 2.
inline std::vector<HighPrecision> hp_ranks(std::span<const double> v) {
    std::vector<HighPrecision> out;
    for (double a : v) {
        long smaller = 0, equal = 0;
        for (double b : v) {
            smaller += b < a ? 1 : 0;
            equal += b == a ? 1 : 0;
        }
        out.push_back(HighPrecision(1 + smaller) + HighPrecision(equal - 1) / 2);
    }
    return out;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    return static_cast<double>(hp_pearson(to_hp(x), to_hp(y)));
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
    return static_cast<double>(hp_pearson(hp_ranks(x), hp_ranks(y)));
}

}  // namespace oracle
