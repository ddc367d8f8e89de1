#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "treew/common.hpp"
#include "treew/measure.hpp"

namespace treew {

/** Rooted weighted tree with a point-to-node mapping.
 *
 *  Node ids are 0..n_nodes-1 with parents preceding children, so node 0 is
 *  always the root. `weight[v]` is the weight of the edge from v to its
 *  parent; the root entry exists but is fixed to 0 and never contributes to
 *  a distance. `node_of_point[p]` is the node carrying point p (-1 if the
 *  point is unmapped). Builders map points to leaves; pruning and the
 *  transport-plan construction may legitimately map points to interior
 *  nodes, and every algorithm here works either way.
 *
 *  Trees are immutable after construction and safe to share across threads.
 */
struct Tree {
    std::vector<std::int32_t> parent;         // -1 for the root
    std::vector<double> weight;               // edge to parent, root entry 0
    std::vector<std::int32_t> depth;          // root at 0
    std::vector<std::int32_t> node_of_point;  // point index -> node id, -1 if unmapped

    std::size_t n_nodes() const { return parent.size(); }
    std::size_t n_points() const { return node_of_point.size(); }

    std::size_t n_leaves() const {
        std::unordered_set<std::int32_t> mapped;
        for (auto v : node_of_point)
            if (v >= 0) mapped.insert(v);
        return mapped.size();
    }

    std::int32_t node_for_point(std::size_t p) const {
        if (p >= node_of_point.size() || node_of_point[p] < 0)
            throw std::invalid_argument("tree: point " + std::to_string(p) +
                                        " has no leaf mapping");
        return node_of_point[p];
    }

    bool operator==(const Tree&) const = default;

    void validate() const {
        const std::size_t n = n_nodes();
        if (n == 0) throw std::invalid_argument("tree: empty");
        if (parent[0] != -1) throw std::invalid_argument("tree: node 0 must be the root");
        if (weight.size() != n || depth.size() != n)
            throw std::invalid_argument("tree: field size mismatch");
        if (weight[0] != 0.0) throw std::invalid_argument("tree: root weight must be 0");
        if (depth[0] != 0) throw std::invalid_argument("tree: root depth must be 0");
        for (std::size_t v = 1; v < n; ++v) {
            if (parent[v] < 0 || static_cast<std::size_t>(parent[v]) >= v)
                throw std::invalid_argument(
                    "tree: node " + std::to_string(v) +
                    " must have a parent with a smaller id (single root, no cycles)");
            if (!(weight[v] >= 0.0) || !std::isfinite(weight[v]))
                throw std::invalid_argument("tree: negative or non-finite weight at node " +
                                            std::to_string(v));
            if (depth[v] != depth[parent[v]] + 1)
                throw std::invalid_argument("tree: depth mismatch at node " + std::to_string(v));
        }
        for (std::size_t p = 0; p < node_of_point.size(); ++p) {
            const auto v = node_of_point[p];
            if (v < -1 || v >= static_cast<std::int32_t>(n))
                throw std::invalid_argument("tree: point " + std::to_string(p) +
                                            " mapped to invalid node");
        }
    }
};

/** Ancestors of a point's node, ordered node -> root inclusive.
 *  This is the support of the column b_p of the tree's B matrix. */
inline std::vector<std::int32_t> ancestor_set(const Tree& tree, std::size_t point) {
    std::int32_t v = tree.node_for_point(point);
    std::vector<std::int32_t> path;
    path.reserve(static_cast<std::size_t>(tree.depth[v]) + 1);
    for (; v != -1; v = tree.parent[v]) path.push_back(v);
    return path;
}

/** Scratch buffer for subtree masses.
 *
 *  Holds mu(subtree(v)) and nu(subtree(v)) for the nodes touched by one
 *  evaluation and resets only those, so a query costs O(sum of support path
 *  lengths) regardless of tree size. The two sides accumulate separately
 *  and the touched set is summed in node order, which makes the result
 *  independent of argument order and exactly zero for identical measures.
 *  One accumulator per thread.
 */
class SubtreeMassAccumulator {
public:
    explicit SubtreeMassAccumulator(std::size_t n_nodes)
        : mu_(n_nodes, 0.0), nu_(n_nodes, 0.0), seen_(n_nodes, 0) {
        touched_.reserve(64);
    }

    std::size_t size() const { return mu_.size(); }

    template <bool kSecondSide>
    void add_along_path(const Tree& tree, std::int32_t node, double mass) {
        auto& side = kSecondSide ? nu_ : mu_;
        for (std::int32_t v = node; v != -1; v = tree.parent[v]) {
            if (!seen_[v]) {
                seen_[v] = 1;
                touched_.push_back(v);
            }
            side[v] += mass;
        }
    }

    // Weighted L1 norm of the side difference over touched nodes, then
    // sparse reset.
    double weighted_abs_sum_and_reset(const Tree& tree) {
        std::sort(touched_.begin(), touched_.end());
        double total = 0.0;
        for (const auto v : touched_) {
            if (v != 0) total += tree.weight[v] * std::abs(mu_[v] - nu_[v]);
            mu_[v] = 0.0;
            nu_[v] = 0.0;
            seen_[v] = 0;
        }
        touched_.clear();
        return total;
    }

private:
    std::vector<double> mu_;
    std::vector<double> nu_;
    std::vector<std::uint8_t> seen_;
    std::vector<std::int32_t> touched_;
};

/** Tree-Wasserstein distance: sum over edges of w_e |mu(subtree) - nu(subtree)|,
 *  equivalently the L1 norm of diag(w) B (a - b). */
inline double twd(const Tree& tree, const Measure& mu, const Measure& nu,
                  SubtreeMassAccumulator& scratch) {
    if (scratch.size() != tree.n_nodes())
        throw std::invalid_argument("twd: accumulator sized for a different tree");
    for (const auto& e : mu.entries())
        scratch.add_along_path<false>(tree, tree.node_for_point(static_cast<std::size_t>(e.index)),
                                      e.mass);
    for (const auto& e : nu.entries())
        scratch.add_along_path<true>(tree, tree.node_for_point(static_cast<std::size_t>(e.index)),
                                     e.mass);
    return scratch.weighted_abs_sum_and_reset(tree);
}

inline double twd(const Tree& tree, const Measure& mu, const Measure& nu) {
    SubtreeMassAccumulator scratch(tree.n_nodes());
    return twd(tree, mu, nu, scratch);
}

/** Contracts every non-root edge of weight zero, merging the child into its
 *  parent. Pairwise path distances between mapped points are preserved
 *  exactly; points of a contracted node end up on its nearest surviving
 *  ancestor (possibly an interior node). */
inline Tree prune_zero_weights(const Tree& tree) {
    const std::size_t n = tree.n_nodes();
    std::vector<std::int32_t> rep(n);  // nearest surviving ancestor (self if kept)
    std::vector<std::int32_t> new_id(n, -1);
    std::int32_t next = 0;
    for (std::size_t v = 0; v < n; ++v) {
        const bool keep = v == 0 || tree.weight[v] != 0.0;
        rep[v] = keep ? static_cast<std::int32_t>(v) : rep[tree.parent[v]];
        if (keep) new_id[v] = next++;
    }
    Tree out;
    out.parent.reserve(static_cast<std::size_t>(next));
    out.weight.reserve(static_cast<std::size_t>(next));
    out.depth.reserve(static_cast<std::size_t>(next));
    for (std::size_t v = 0; v < n; ++v) {
        if (new_id[v] < 0) continue;
        if (v == 0) {
            out.parent.push_back(-1);
            out.weight.push_back(0.0);
            out.depth.push_back(0);
        } else {
            const std::int32_t p = new_id[rep[tree.parent[v]]];
            out.parent.push_back(p);
            out.weight.push_back(tree.weight[v]);
            out.depth.push_back(out.depth[p] + 1);
        }
    }
    out.node_of_point.resize(tree.n_points(), -1);
    for (std::size_t p = 0; p < tree.n_points(); ++p)
        if (tree.node_of_point[p] >= 0) out.node_of_point[p] = new_id[rep[tree.node_of_point[p]]];
    return out;
}

inline std::size_t count_nonzero_weights(const Tree& tree) {
    std::size_t c = 0;
    for (double w : tree.weight)
        if (w != 0.0) ++c;
    return c;
}

/** Tree file: line 1 `N M`; N node lines `id parent weight` (parents before
 *  children, root parent -1); M mapping lines `node_id point_index`. */
inline void save_tree(std::ostream& out, const Tree& tree) {
    std::size_t n_map = 0;
    for (auto v : tree.node_of_point)
        if (v >= 0) ++n_map;
    out << tree.n_nodes() << ' ' << n_map << '\n';
    for (std::size_t v = 0; v < tree.n_nodes(); ++v)
        out << v << ' ' << tree.parent[v] << ' ' << fmt_g17(tree.weight[v]) << '\n';
    for (std::size_t p = 0; p < tree.n_points(); ++p)
        if (tree.node_of_point[p] >= 0) out << tree.node_of_point[p] << ' ' << p << '\n';
}

inline void save_tree(const std::string& path, const Tree& tree) {
    auto out = detail::open_output(path);
    save_tree(out, tree);
}

inline std::string tree_to_string(const Tree& tree) {
    std::ostringstream out;
    save_tree(out, tree);
    return out.str();
}

inline Tree load_tree(std::istream& in, const std::string& origin = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
        throw std::runtime_error("load error in '" + origin + "': empty tree file");
    ++line_no;
    auto header = detail::split_ws(line);
    if (header.size() != 2)
        throw std::runtime_error("load error at line 1: expected header 'N M'");
    const long n = detail::parse_long(header[0], 1, "node count");
    const long n_map = detail::parse_long(header[1], 1, "mapping count");
    if (n < 1 || n_map < 0)
        throw std::runtime_error("load error at line 1: bad node or mapping count");

    Tree tree;
    tree.parent.resize(static_cast<std::size_t>(n));
    tree.weight.resize(static_cast<std::size_t>(n));
    tree.depth.resize(static_cast<std::size_t>(n));
    std::size_t roots = 0;
    for (long v = 0; v < n; ++v) {
        if (!std::getline(in, line))
            throw std::runtime_error("load error at line " + std::to_string(line_no + 1) +
                                     ": expected " + std::to_string(n) + " node lines");
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.size() != 3)
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": expected 'id parent weight'");
        const long id = detail::parse_long(toks[0], line_no, "node id");
        const long parent = detail::parse_long(toks[1], line_no, "parent id");
        const double w = detail::parse_double(toks[2], line_no, "weight");
        if (id != v)
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": node ids must be 0.." + std::to_string(n - 1) +
                                     " in order");
        if (parent == -1) {
            ++roots;
            if (roots > 1)
                throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                         ": multiple roots");
            tree.parent[static_cast<std::size_t>(v)] = -1;
            tree.depth[static_cast<std::size_t>(v)] = 0;
        } else {
            if (parent < 0 || parent >= v)
                throw std::runtime_error(
                    "load error at line " + std::to_string(line_no) +
                    ": parent must precede child (cyclic or out-of-order links)");
            tree.parent[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(parent);
            tree.depth[static_cast<std::size_t>(v)] =
                tree.depth[static_cast<std::size_t>(parent)] + 1;
        }
        if (!(w >= 0.0))
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": negative weight");
        tree.weight[static_cast<std::size_t>(v)] = w;
    }
    if (roots != 1) throw std::runtime_error("load error in '" + origin + "': no root node");
    tree.weight[0] = 0.0;  // stored root weight is ignored

    std::vector<std::pair<long, long>> mappings;
    mappings.reserve(static_cast<std::size_t>(n_map));
    long max_point = -1;
    for (long e = 0; e < n_map; ++e) {
        if (!std::getline(in, line))
            throw std::runtime_error("load error at line " + std::to_string(line_no + 1) +
                                     ": expected " + std::to_string(n_map) + " mapping lines");
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.size() != 2)
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": expected 'node_id point_index'");
        const long node = detail::parse_long(toks[0], line_no, "node id");
        const long point = detail::parse_long(toks[1], line_no, "point index");
        if (node < 0 || node >= n)
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": node id out of range");
        if (point < 0)
            throw std::runtime_error("load error at line " + std::to_string(line_no) +
                                     ": negative point index");
        mappings.emplace_back(node, point);
        max_point = std::max(max_point, point);
    }
    tree.node_of_point.resize(static_cast<std::size_t>(max_point + 1), -1);
    for (const auto& [node, point] : mappings) {
        if (tree.node_of_point[static_cast<std::size_t>(point)] != -1)
            throw std::runtime_error("load error in '" + origin + "': point " +
                                     std::to_string(point) + " mapped twice");
        tree.node_of_point[static_cast<std::size_t>(point)] = static_cast<std::int32_t>(node);
    }
    tree.validate();
    return tree;
}

inline Tree load_tree(const std::string& path) {
    auto in = detail::open_input(path);
    return load_tree(in, path);
}

}  // namespace treew
