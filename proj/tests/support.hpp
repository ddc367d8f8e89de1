#pragma once

// Test-only helpers and independent oracles. Everything here deliberately
// avoids the library's own computation paths: tree distances go through a
// generic graph Dijkstra, optimal transport through exhaustive basis
// enumeration, and the Lasso through projected gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "treew/treew.hpp"

namespace testsupport {

using treew::Measure;
using treew::PointCloud;
using treew::Rng;
using treew::Tree;

// ---------------------------------------------------------------- randomness

inline double rand_normal(Rng& rng) {
    // Box-Muller; avoids log(0) by flooring the uniform.
    const double u1 = std::max(rng.unit(), 1e-300);
    const double u2 = rng.unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline PointCloud random_cloud(std::size_t n, std::size_t dim, Rng& rng, bool gaussian = false) {
    std::vector<double> coords(n * dim);
    for (auto& c : coords) c = gaussian ? rand_normal(rng) : rng.unit();
    return PointCloud(n, dim, std::move(coords));
}

// A random measure supported on `support` distinct points of an n-point cloud.
inline Measure random_measure(std::size_t n_points, std::size_t support, Rng& rng) {
    std::vector<std::int32_t> ids(n_points);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t k = 0; k < support; ++k)
        std::swap(ids[k], ids[k + rng.below(n_points - k)]);
    std::vector<Measure::Entry> entries;
    double sum = 0.0;
    for (std::size_t k = 0; k < support; ++k) {
        const double mass = 0.05 + rng.unit();
        entries.push_back({ids[k], mass});
        sum += mass;
    }
    for (auto& e : entries) e.mass /= sum;
    return Measure(std::move(entries), n_points);
}

// Like random_measure but with heavy-tailed masses (squared exponentials),
// the shape that word-frequency style weightings have.
inline Measure frequency_measure(std::size_t n_points, std::size_t support, Rng& rng) {
    std::vector<std::int32_t> ids(n_points);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t k = 0; k < support; ++k)
        std::swap(ids[k], ids[k + rng.below(n_points - k)]);
    std::vector<Measure::Entry> entries;
    double sum = 0.0;
    for (std::size_t k = 0; k < support; ++k) {
        const double e = -std::log(std::max(rng.unit(), 1e-12));
        const double mass = e * e;
        entries.push_back({ids[k], mass});
        sum += mass;
    }
    for (auto& e : entries) e.mass /= sum;
    return Measure(std::move(entries), n_points);
}

/** A random rooted tree with exactly `n_leaves` mapped leaves and positive
 *  non-root weights: a random interior skeleton, then one dedicated leaf
 *  node per point hung off a random skeleton node. */
inline Tree random_tree(std::size_t n_leaves, Rng& rng) {
    Tree tree;
    tree.parent.push_back(-1);
    tree.weight.push_back(0.0);
    tree.depth.push_back(0);
    const std::size_t n_interior = rng.below(n_leaves + 1);
    for (std::size_t k = 0; k < n_interior; ++k) {
        const auto parent = static_cast<std::int32_t>(rng.below(tree.n_nodes()));
        tree.parent.push_back(parent);
        tree.weight.push_back(0.05 + rng.unit());
        tree.depth.push_back(tree.depth[static_cast<std::size_t>(parent)] + 1);
    }
    const std::size_t skeleton = tree.n_nodes();
    tree.node_of_point.resize(n_leaves);
    for (std::size_t p = 0; p < n_leaves; ++p) {
        const auto parent = static_cast<std::int32_t>(rng.below(skeleton));
        tree.node_of_point[p] = static_cast<std::int32_t>(tree.n_nodes());
        tree.parent.push_back(parent);
        tree.weight.push_back(0.05 + rng.unit());
        tree.depth.push_back(tree.depth[static_cast<std::size_t>(parent)] + 1);
    }
    tree.validate();
    return tree;
}

// ------------------------------------------------------------ tree distances

/** Dijkstra over the undirected weighted graph induced by the tree edges;
 *  independent of the ancestor-walk logic in the library. */
inline double dijkstra_tree_distance(const Tree& tree, std::int32_t from, std::int32_t to) {
    const std::size_t n = tree.n_nodes();
    std::vector<std::vector<std::pair<std::int32_t, double>>> adj(n);
    for (std::size_t v = 1; v < n; ++v) {
        adj[v].emplace_back(tree.parent[v], tree.weight[v]);
        adj[static_cast<std::size_t>(tree.parent[v])].emplace_back(static_cast<std::int32_t>(v),
                                                                   tree.weight[v]);
    }
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::int32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[static_cast<std::size_t>(from)] = 0.0;
    heap.emplace(0.0, from);
    while (!heap.empty()) {
        const auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[static_cast<std::size_t>(v)]) continue;
        if (v == to) break;
        for (const auto& [w, len] : adj[static_cast<std::size_t>(v)]) {
            if (d + len < dist[static_cast<std::size_t>(w)]) {
                dist[static_cast<std::size_t>(w)] = d + len;
                heap.emplace(d + len, w);
            }
        }
    }
    return dist[static_cast<std::size_t>(to)];
}

inline double dijkstra_point_distance(const Tree& tree, std::size_t p, std::size_t q) {
    return dijkstra_tree_distance(tree, tree.node_for_point(p), tree.node_for_point(q));
}

// -------------------------------------------------------- brute-force OT

/** Exhaustive minimum over the transportation polytope's vertices: every
 *  (n + m - 1)-subset of cells that forms a spanning tree and admits
 *  non-negative flows. Exponential; fine for n, m <= 5. */
inline double brute_force_w1(const std::vector<double>& a, const std::vector<double>& b,
                             const treew::DenseMatrix& cost) {
    const std::size_t n = a.size(), m = b.size();
    const std::size_t n_cells = n * m;
    const std::size_t basis_size = n + m - 1;
    std::vector<std::size_t> pick(basis_size);
    double best = std::numeric_limits<double>::infinity();

    // Solve the flows on a candidate spanning basis by peeling degree-1
    // nodes; infeasible (negative flow) bases are discarded.
    const auto try_basis = [&](const std::vector<std::size_t>& cells) {
        std::vector<std::vector<std::size_t>> incident(n + m);
        for (std::size_t k = 0; k < cells.size(); ++k) {
            incident[cells[k] / m].push_back(k);
            incident[n + cells[k] % m].push_back(k);
        }
        std::vector<double> need(n + m);
        for (std::size_t i = 0; i < n; ++i) need[i] = a[i];
        for (std::size_t j = 0; j < m; ++j) need[n + j] = b[j];
        std::vector<bool> used(cells.size(), false);
        std::vector<std::size_t> degree(n + m);
        std::vector<std::size_t> ready;
        for (std::size_t v = 0; v < n + m; ++v) {
            degree[v] = incident[v].size();
            if (degree[v] == 1) ready.push_back(v);
        }
        std::vector<double> flow(cells.size(), 0.0);
        std::size_t resolved = 0;
        while (!ready.empty()) {
            const std::size_t v = ready.back();
            ready.pop_back();
            std::size_t edge = cells.size();
            for (const auto k : incident[v])
                if (!used[k]) {
                    edge = k;
                    break;
                }
            if (edge == cells.size()) continue;  // isolated by earlier peeling
            used[edge] = true;
            ++resolved;
            flow[edge] = need[v];
            if (flow[edge] < -1e-12) return;  // infeasible basis
            const std::size_t i = cells[edge] / m, j = cells[edge] % m;
            const std::size_t other = v < n ? n + j : i;
            need[v] = 0.0;
            need[other] -= flow[edge];
            if (--degree[other] == 1) ready.push_back(other);
            degree[v] = 0;
        }
        if (resolved != cells.size()) return;  // contains a cycle / disconnected
        for (const auto v_need : need)
            if (std::abs(v_need) > 1e-9) return;
        double total = 0.0;
        for (std::size_t k = 0; k < cells.size(); ++k)
            total += std::max(flow[k], 0.0) * cost.at(cells[k] / m, cells[k] % m);
        best = std::min(best, total);
    };

    // Enumerate basis candidates: combinations of cells.
    std::vector<std::size_t> cells(basis_size);
    const auto recurse = [&](auto&& self, std::size_t start, std::size_t chosen) -> void {
        if (chosen == basis_size) {
            try_basis(cells);
            return;
        }
        for (std::size_t c = start; c + (basis_size - chosen) <= n_cells; ++c) {
            cells[chosen] = c;
            self(self, c + 1, chosen + 1);
        }
    };
    recurse(recurse, 0, 0);
    return best;
}

/** For uniform masses 1/n on both sides the polytope's vertices are the
 *  permutation matrices; enumerate them all. */
inline double brute_force_w1_uniform(std::size_t n, const treew::DenseMatrix& cost) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost.at(i, perm[i]);
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

/** A random exactly-feasible coupling: greedy fill along a random ordering
 *  of sources and sinks (a northwest-corner rule on shuffled indices). */
inline treew::TransportPlan random_feasible_plan(const std::vector<double>& a,
                                                 const std::vector<double>& b, Rng& rng) {
    std::vector<std::size_t> order_i(a.size()), order_j(b.size());
    std::iota(order_i.begin(), order_i.end(), 0);
    std::iota(order_j.begin(), order_j.end(), 0);
    for (std::size_t k = 0; k + 1 < order_i.size(); ++k)
        std::swap(order_i[k], order_i[k + rng.below(order_i.size() - k)]);
    for (std::size_t k = 0; k + 1 < order_j.size(); ++k)
        std::swap(order_j[k], order_j[k + rng.below(order_j.size() - k)]);
    std::vector<double> ra = a, rb = b;
    treew::TransportPlan plan;
    std::size_t i = 0, j = 0;
    while (i < order_i.size() && j < order_j.size()) {
        const double f = std::min(ra[order_i[i]], rb[order_j[j]]);
        if (f > 0.0)
            plan.entries.push_back({static_cast<std::int32_t>(order_i[i]),
                                    static_cast<std::int32_t>(order_j[j]), f});
        ra[order_i[i]] -= f;
        rb[order_j[j]] -= f;
        if (ra[order_i[i]] <= rb[order_j[j]])
            ++i;
        else
            ++j;
    }
    return plan;
}

// ------------------------------------------------------ projected gradient

/** Long-run projected-gradient reference for the non-negative Lasso: step
 *  1/L with L from power iteration on 2 Z^T Z, a fixed iteration budget,
 *  and projection onto the non-negative orthant. */
inline std::vector<double> projected_gradient_lasso(const treew::FeatureMatrix& features,
                                                    const std::vector<double>& targets,
                                                    double lambda, std::size_t iterations) {
    const std::size_t n_cols = features.n_cols;
    const std::size_t n_rows = features.n_rows;
    // Dense G = 2 Z^T Z and c = 2 Z^T d.
    std::vector<double> gram(n_cols * n_cols, 0.0);
    std::vector<double> lin(n_cols, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t e = features.row_ptr[r]; e < features.row_ptr[r + 1]; ++e) {
            const auto k = static_cast<std::size_t>(features.col_idx[e]);
            lin[k] += 2.0 * targets[r];
            for (std::size_t f = features.row_ptr[r]; f < features.row_ptr[r + 1]; ++f)
                gram[k * n_cols + static_cast<std::size_t>(features.col_idx[f])] += 2.0;
        }
    }
    // Power iteration for the Lipschitz constant of the gradient.
    std::vector<double> vec(n_cols, 1.0), tmp(n_cols);
    double lip = 1.0;
    for (int it = 0; it < 100; ++it) {
        double norm = 0.0;
        for (std::size_t k = 0; k < n_cols; ++k) {
            double acc = 0.0;
            for (std::size_t l = 0; l < n_cols; ++l) acc += gram[k * n_cols + l] * vec[l];
            tmp[k] = acc;
            norm += acc * acc;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        lip = norm;
        for (std::size_t k = 0; k < n_cols; ++k) vec[k] = tmp[k] / norm;
    }
    const double step = 1.0 / lip;

    std::vector<double> w(n_cols, 0.0);
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t k = 0; k < n_cols; ++k) {
            double acc = 0.0;
            for (std::size_t l = 0; l < n_cols; ++l) acc += gram[k * n_cols + l] * w[l];
            tmp[k] = acc - lin[k] + lambda;
        }
        for (std::size_t k = 0; k < n_cols; ++k) w[k] = std::max(0.0, w[k] - step * tmp[k]);
    }
    return w;
}

inline double lasso_objective(const treew::FeatureMatrix& features,
                              const std::vector<double>& targets, const std::vector<double>& w,
                              double lambda) {
    double obj = 0.0;
    for (std::size_t r = 0; r < features.n_rows; ++r) {
        double pred = 0.0;
        for (std::size_t e = features.row_ptr[r]; e < features.row_ptr[r + 1]; ++e)
            pred += w[static_cast<std::size_t>(features.col_idx[e])];
        const double res = targets[r] - pred;
        obj += res * res;
    }
    for (const double v : w) obj += lambda * v;
    return obj;
}

// ----------------------------------------------------------------- plumbing

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 gen(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("treew-" + tag + "-" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void spit(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

/** The Figure-1 example tree: root with children n1 and n2, n1 with leaf
 *  children n3 (point 0) and n4 (point 1), n2 a leaf carrying point 2.
 *  Node ids: root=0, n1=1, n2=2, n3=3, n4=4. */
inline Tree figure1_tree(double w1 = 0.3, double w2 = 0.7, double w3 = 0.2, double w4 = 0.4) {
    Tree tree;
    tree.parent = {-1, 0, 0, 1, 1};
    tree.weight = {0.0, w1, w2, w3, w4};
    tree.depth = {0, 1, 1, 2, 2};
    tree.node_of_point = {3, 4, 2};
    tree.validate();
    return tree;
}

}  // namespace testsupport
