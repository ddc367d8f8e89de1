#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "treew/common.hpp"
#include "treew/measure.hpp"
#include "treew/tree.hpp"

namespace treew {

/** A coupling between two measures, indexed by support positions. */
struct TransportPlan {
    struct Entry {
        std::int32_t i;  // index into mu's support
        std::int32_t j;  // index into nu's support
        double mass;     // > 0
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries;

    bool operator==(const TransportPlan&) const = default;
};

struct ExactW1Result {
    double value = 0.0;
    TransportPlan plan;
};

// The exact solver is a desk-scale oracle, not a production OT engine.
inline constexpr std::size_t kExactSupportGuard = 4096;

namespace detail {

// One basic cell of the transportation tableau, also a spanning-tree arc
// over the n + m bipartite nodes.
struct BasicArc {
    std::int32_t i;
    std::int32_t j;
    double flow;
};

}  // namespace detail

/** Exact discrete 1-Wasserstein value and an optimal basic transport plan.
 *
 *  Transportation network simplex: northwest-corner start, Bland's
 *  lowest-index entering rule, and a first-minimum leaving rule on the
 *  pivot cycle, so runs are deterministic and never cycle. The returned
 *  plan is a vertex of the transportation polytope: cycle-free with at most
 *  n + n' - 1 positive entries.
 */
inline ExactW1Result exact_w1(const Measure& mu, const Measure& nu, const DenseMatrix& cost) {
    const std::size_t n = mu.support_size();
    const std::size_t m = nu.support_size();
    if (n + m > kExactSupportGuard)
        throw std::invalid_argument("exact_w1: combined support " + std::to_string(n + m) +
                                    " exceeds the desk-scale guard of " +
                                    std::to_string(kExactSupportGuard));
    if (cost.rows != n || cost.cols != m)
        throw std::invalid_argument("exact_w1: cost matrix shape mismatch");
    for (const double c : cost.data)
        if (!std::isfinite(c) || c < 0.0)
            throw std::invalid_argument("exact_w1: costs must be finite and non-negative");

    std::vector<double> a(n), b(m);
    for (std::size_t i = 0; i < n; ++i) a[i] = mu.entries()[i].mass;
    for (std::size_t j = 0; j < m; ++j) b[j] = nu.entries()[j].mass;

    // Northwest-corner initial basis: exactly n + m - 1 cells, advancing one
    // side per cell (degenerate zero flows are kept in the basis).
    std::vector<detail::BasicArc> basis;
    basis.reserve(n + m - 1);
    {
        std::vector<double> ra = a, rb = b;
        std::size_t i = 0, j = 0;
        while (true) {
            const double f = std::min(ra[i], rb[j]);
            basis.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(j), f});
            ra[i] -= f;
            rb[j] -= f;
            if (i + 1 == n && j + 1 == m) break;
            if (j + 1 == m)
                ++i;
            else if (i + 1 == n)
                ++j;
            else if (ra[i] <= rb[j])
                ++i;
            else
                ++j;
        }
    }

    const std::size_t n_nodes = n + m;  // sources 0..n-1, sinks n..n+m-1
    std::vector<std::vector<std::int32_t>> adj(n_nodes);  // arc ids per node
    auto rebuild_adjacency = [&] {
        for (auto& lst : adj) lst.clear();
        for (std::size_t e = 0; e < basis.size(); ++e) {
            adj[static_cast<std::size_t>(basis[e].i)].push_back(static_cast<std::int32_t>(e));
            adj[n + static_cast<std::size_t>(basis[e].j)].push_back(static_cast<std::int32_t>(e));
        }
    };

    std::vector<double> u(n), v(m);
    std::vector<std::int32_t> stack, parent_arc(n_nodes);
    auto compute_duals = [&] {
        parent_arc.assign(n_nodes, -2);  // -2 unvisited, -1 BFS root
        stack.assign(1, 0);
        parent_arc[0] = -1;
        u[0] = 0.0;
        while (!stack.empty()) {
            const std::int32_t node = stack.back();
            stack.pop_back();
            for (const auto e : adj[static_cast<std::size_t>(node)]) {
                const auto& arc = basis[static_cast<std::size_t>(e)];
                const std::int32_t other =
                    node < static_cast<std::int32_t>(n) ? static_cast<std::int32_t>(n) + arc.j
                                                        : arc.i;
                if (parent_arc[static_cast<std::size_t>(other)] != -2) continue;
                parent_arc[static_cast<std::size_t>(other)] = e;
                const double c = cost.at(static_cast<std::size_t>(arc.i),
                                         static_cast<std::size_t>(arc.j));
                if (other >= static_cast<std::int32_t>(n))
                    v[static_cast<std::size_t>(arc.j)] = c - u[static_cast<std::size_t>(arc.i)];
                else
                    u[static_cast<std::size_t>(arc.i)] = c - v[static_cast<std::size_t>(arc.j)];
                stack.push_back(other);
            }
        }
    };

    // Path between two nodes through the basis tree, as a list of arc ids.
    std::vector<std::int32_t> prev_arc(n_nodes), queue;
    auto tree_path = [&](std::int32_t from, std::int32_t to) {
        prev_arc.assign(n_nodes, -2);
        queue.assign(1, from);
        prev_arc[static_cast<std::size_t>(from)] = -1;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const std::int32_t node = queue[head];
            if (node == to) break;
            for (const auto e : adj[static_cast<std::size_t>(node)]) {
                const auto& arc = basis[static_cast<std::size_t>(e)];
                const std::int32_t other =
                    node < static_cast<std::int32_t>(n) ? static_cast<std::int32_t>(n) + arc.j
                                                        : arc.i;
                if (prev_arc[static_cast<std::size_t>(other)] != -2) continue;
                prev_arc[static_cast<std::size_t>(other)] = e;
                queue.push_back(other);
            }
        }
        std::vector<std::int32_t> path;
        std::int32_t node = to;
        while (node != from) {
            const std::int32_t e = prev_arc[static_cast<std::size_t>(node)];
            path.push_back(e);
            const auto& arc = basis[static_cast<std::size_t>(e)];
            node = node < static_cast<std::int32_t>(n) ? static_cast<std::int32_t>(n) + arc.j
                                                       : arc.i;
        }
        std::reverse(path.begin(), path.end());
        return path;
    };

    constexpr double kReducedCostTol = 1e-12;
    const std::size_t max_pivots = 64 * n_nodes * n_nodes + 4096;
    for (std::size_t pivot = 0;; ++pivot) {
        if (pivot >= max_pivots)
            throw std::runtime_error("exact_w1: pivot limit exceeded (numerical trouble)");
        rebuild_adjacency();
        compute_duals();

        // Bland's rule: first cell (row-major) with negative reduced cost.
        std::int32_t enter_i = -1, enter_j = -1;
        for (std::size_t i = 0; i < n && enter_i < 0; ++i)
            for (std::size_t j = 0; j < m; ++j)
                if (cost.at(i, j) - u[i] - v[j] < -kReducedCostTol) {
                    enter_i = static_cast<std::int32_t>(i);
                    enter_j = static_cast<std::int32_t>(j);
                    break;
                }
        if (enter_i < 0) break;  // optimal

        // The entering arc closes one cycle with the basis path from its
        // source to its sink; flows alternate -theta starting at the first
        // path arc (which shares the entering arc's row).
        const auto path = tree_path(enter_i, static_cast<std::int32_t>(n) + enter_j);
        double theta = std::numeric_limits<double>::infinity();
        std::int32_t leaving = -1;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const auto& arc = basis[static_cast<std::size_t>(path[k])];
            // Ties resolved by lowest (i, j): keeps degenerate pivots from cycling.
            if (leaving >= 0) {
                const auto& cur = basis[static_cast<std::size_t>(leaving)];
                if (arc.flow > theta ||
                    (arc.flow == theta && std::tie(arc.i, arc.j) >= std::tie(cur.i, cur.j)))
                    continue;
            }
            theta = arc.flow;
            leaving = path[k];
        }
        for (std::size_t k = 0; k < path.size(); ++k)
            basis[static_cast<std::size_t>(path[k])].flow += k % 2 == 0 ? -theta : theta;
        basis[static_cast<std::size_t>(leaving)] = {enter_i, enter_j, theta};
    }

    ExactW1Result result;
    for (const auto& arc : basis) {
        if (arc.flow > 0.0) {
            result.value +=
                arc.flow * cost.at(static_cast<std::size_t>(arc.i), static_cast<std::size_t>(arc.j));
            result.plan.entries.push_back({arc.i, arc.j, arc.flow});
        }
    }
    std::sort(result.plan.entries.begin(), result.plan.entries.end(),
              [](const auto& x, const auto& y) { return std::tie(x.i, x.j) < std::tie(y.i, y.j); });
    return result;
}

/** Realizes the tree that makes TWD coincide with the exact 1-Wasserstein
 *  value of the plan it came from.
 *
 *  Every support point becomes a node, coincident support points (the same
 *  point index on both sides) collapse into one, and each plan entry turns
 *  into a direct edge weighted by its ground distance. A cycle in the plan
 *  support is rejected: only basic plans induce trees. When the support
 *  graph is a forest, its components hang off a zero-weight artificial
 *  root, which leaves every within-component path length unchanged.
 */
inline Tree tree_from_plan(const TransportPlan& plan, const Measure& mu, const Measure& nu,
                           const DenseMatrix& cost) {
    if (plan.entries.empty()) throw std::invalid_argument("tree_from_plan: empty plan");
    if (cost.rows != mu.support_size() || cost.cols != nu.support_size())
        throw std::invalid_argument("tree_from_plan: cost matrix shape mismatch");

    // Collapse support points: graph node per distinct point index.
    std::int32_t max_point = 0;
    for (const auto& e : mu.entries()) max_point = std::max(max_point, e.index);
    for (const auto& e : nu.entries()) max_point = std::max(max_point, e.index);
    std::vector<std::int32_t> node_of(static_cast<std::size_t>(max_point) + 1, -1);
    std::vector<std::int32_t> point_of;
    auto graph_node = [&](std::int32_t point) {
        if (node_of[static_cast<std::size_t>(point)] < 0) {
            node_of[static_cast<std::size_t>(point)] = static_cast<std::int32_t>(point_of.size());
            point_of.push_back(point);
        }
        return node_of[static_cast<std::size_t>(point)];
    };
    for (const auto& e : mu.entries()) graph_node(e.index);
    for (const auto& e : nu.entries()) graph_node(e.index);
    const std::size_t n_graph = point_of.size();

    struct Edge {
        std::int32_t to;
        double weight;
    };
    std::vector<std::vector<Edge>> adj(n_graph);
    std::vector<std::int32_t> comp_root(n_graph);
    for (std::size_t g = 0; g < n_graph; ++g) comp_root[g] = static_cast<std::int32_t>(g);
    const auto find = [&](std::int32_t g) {
        while (comp_root[static_cast<std::size_t>(g)] != g) {
            comp_root[static_cast<std::size_t>(g)] =
                comp_root[static_cast<std::size_t>(comp_root[static_cast<std::size_t>(g)])];
            g = comp_root[static_cast<std::size_t>(g)];
        }
        return g;
    };

    for (const auto& entry : plan.entries) {
        if (entry.i < 0 || static_cast<std::size_t>(entry.i) >= mu.support_size() ||
            entry.j < 0 || static_cast<std::size_t>(entry.j) >= nu.support_size())
            throw std::invalid_argument("tree_from_plan: plan entry out of range");
        if (!(entry.mass > 0.0)) throw std::invalid_argument("tree_from_plan: non-positive mass");
        const std::int32_t gu =
            graph_node(mu.entries()[static_cast<std::size_t>(entry.i)].index);
        const std::int32_t gv =
            graph_node(nu.entries()[static_cast<std::size_t>(entry.j)].index);
        if (gu == gv) continue;  // mass staying on a shared point
        const std::int32_t ru = find(gu), rv = find(gv);
        if (ru == rv)
            throw std::invalid_argument(
                "tree_from_plan: plan support contains a cycle (not a basic solution)");
        comp_root[static_cast<std::size_t>(ru)] = rv;
        const double w =
            cost.at(static_cast<std::size_t>(entry.i), static_cast<std::size_t>(entry.j));
        adj[static_cast<std::size_t>(gu)].push_back({gv, w});
        adj[static_cast<std::size_t>(gv)].push_back({gu, w});
    }

    std::vector<std::int32_t> component_heads;  // lowest graph node per component
    {
        std::vector<bool> seen(n_graph, false);
        for (std::size_t g = 0; g < n_graph; ++g) {
            const auto r = static_cast<std::size_t>(find(static_cast<std::int32_t>(g)));
            if (!seen[r]) {
                seen[r] = true;
                component_heads.push_back(static_cast<std::int32_t>(g));
            }
        }
    }

    Tree tree;
    const bool artificial_root = component_heads.size() > 1;
    std::vector<std::int32_t> tree_id(n_graph, -1);
    std::vector<std::int32_t> bfs;
    if (artificial_root) {
        tree.parent.push_back(-1);
        tree.weight.push_back(0.0);
        tree.depth.push_back(0);
    } else {
        tree_id[static_cast<std::size_t>(component_heads[0])] = 0;
        tree.parent.push_back(-1);
        tree.weight.push_back(0.0);
        tree.depth.push_back(0);
        bfs.push_back(component_heads[0]);
    }
    for (const auto head : component_heads) {
        if (!artificial_root) break;
        tree_id[static_cast<std::size_t>(head)] = static_cast<std::int32_t>(tree.n_nodes());
        tree.parent.push_back(0);
        tree.weight.push_back(0.0);
        tree.depth.push_back(1);
        bfs.push_back(head);
    }
    for (std::size_t head = 0; head < bfs.size(); ++head) {
        const std::int32_t g = bfs[head];
        const std::int32_t id = tree_id[static_cast<std::size_t>(g)];
        for (const auto& edge : adj[static_cast<std::size_t>(g)]) {
            if (tree_id[static_cast<std::size_t>(edge.to)] != -1) continue;
            tree_id[static_cast<std::size_t>(edge.to)] = static_cast<std::int32_t>(tree.n_nodes());
            tree.parent.push_back(id);
            tree.weight.push_back(edge.weight);
            tree.depth.push_back(tree.depth[static_cast<std::size_t>(id)] + 1);
            bfs.push_back(edge.to);
        }
    }

    tree.node_of_point.assign(static_cast<std::size_t>(max_point) + 1, -1);
    for (std::size_t g = 0; g < n_graph; ++g)
        tree.node_of_point[static_cast<std::size_t>(point_of[g])] = tree_id[g];
    tree.validate();
    return tree;
}

}  // namespace treew
