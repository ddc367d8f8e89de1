#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>
#include <vector>

#include "treew/point_cloud.hpp"
#include "treew/tree.hpp"

namespace treew {

struct QuadTreeConfig {
    std::int32_t max_depth = 6;
    std::uint64_t seed = 0;
    // When non-empty, overrides the seed-derived per-dimension shift
    // (size must equal the cloud dimension).
    std::vector<double> shift;
};

struct ClusterTreeConfig {
    std::int32_t branching = 4;
    std::int32_t max_depth = 6;
    std::uint64_t seed = 0;
};

struct BoundingBox {
    std::vector<double> lo;
    std::vector<double> hi;
    // Longest extent over all dimensions; the cube side used for shifting.
    double side() const {
        double s = 0.0;
        for (std::size_t d = 0; d < lo.size(); ++d) s = std::max(s, hi[d] - lo[d]);
        return s;
    }
};

inline BoundingBox bounding_box(const PointCloud& cloud) {
    BoundingBox box;
    box.lo.assign(cloud.dim(), std::numeric_limits<double>::infinity());
    box.hi.assign(cloud.dim(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < cloud.n_points(); ++i) {
        auto p = cloud.point(i);
        for (std::size_t d = 0; d < p.size(); ++d) {
            box.lo[d] = std::min(box.lo[d], p[d]);
            box.hi[d] = std::max(box.hi[d], p[d]);
        }
    }
    return box;
}

/** Per-dimension offsets uniform in [0, side), reproducible from the seed.
 *  A degenerate box (all points equal) yields zero offsets. */
inline std::vector<double> random_shift(std::uint64_t seed, const BoundingBox& box) {
    Rng rng(seed);
    const double side = box.side();
    std::vector<double> shift(box.lo.size());
    for (auto& s : shift) s = side * rng.unit();
    return shift;
}

namespace detail {

inline bool all_points_equal(const PointCloud& cloud, const std::vector<std::int32_t>& pts) {
    auto first = cloud.point(static_cast<std::size_t>(pts[0]));
    for (std::size_t k = 1; k < pts.size(); ++k) {
        auto p = cloud.point(static_cast<std::size_t>(pts[k]));
        for (std::size_t d = 0; d < p.size(); ++d)
            if (p[d] != first[d]) return false;
    }
    return true;
}

}  // namespace detail

/** Randomly shifted hierarchical hypercube subdivision.
 *
 *  The bounding cube of the shifted points is split at every dimension's
 *  midpoint per level; only occupied child cells materialize, so the node
 *  count stays <= n_points * max_depth + 1 in any dimension. A cell becomes
 *  a leaf once it holds a single distinct point or the depth cap is reached
 *  (the root always subdivides). Node at depth l gets default weight 2^-l.
 */
inline Tree build_quadtree(const PointCloud& cloud, const QuadTreeConfig& cfg) {
    if (cfg.max_depth < 1) throw std::invalid_argument("build_quadtree: max_depth must be >= 1");
    const std::size_t dim = cloud.dim();
    const BoundingBox box = bounding_box(cloud);
    std::vector<double> shift = cfg.shift.empty() ? random_shift(cfg.seed, box) : cfg.shift;
    if (shift.size() != dim)
        throw std::invalid_argument("build_quadtree: shift dimension mismatch");
    const double side0 = 2.0 * box.side();

    Tree tree;
    tree.parent.push_back(-1);
    tree.weight.push_back(0.0);
    tree.depth.push_back(0);
    tree.node_of_point.assign(cloud.n_points(), -1);

    std::vector<std::int32_t> all(cloud.n_points());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int32_t>(i);

    if (side0 == 0.0) {
        // Every point coincides: a single leaf below the root.
        tree.parent.push_back(0);
        tree.weight.push_back(0.5);
        tree.depth.push_back(1);
        for (auto p : all) tree.node_of_point[static_cast<std::size_t>(p)] = 1;
        return tree;
    }

    struct Cell {
        std::int32_t node;
        std::int32_t depth;
        std::vector<double> lo;  // min corner in shifted coordinates
        std::vector<std::int32_t> points;
    };
    std::deque<Cell> queue;
    queue.push_back({0, 0, box.lo, std::move(all)});

    while (!queue.empty()) {
        Cell cell = std::move(queue.front());
        queue.pop_front();
        const double half = std::ldexp(side0, -(cell.depth + 1));
        // Group the cell's points by child key (one bit per dimension);
        // std::map keeps the child order deterministic.
        std::map<std::vector<std::uint8_t>, std::vector<std::int32_t>> children;
        std::vector<std::uint8_t> key(dim);
        for (const auto p : cell.points) {
            auto x = cloud.point(static_cast<std::size_t>(p));
            for (std::size_t d = 0; d < dim; ++d)
                key[d] = x[d] + shift[d] >= cell.lo[d] + half ? 1 : 0;
            children[key].push_back(p);
        }
        for (auto& [bits, pts] : children) {
            const auto node = static_cast<std::int32_t>(tree.n_nodes());
            const std::int32_t d = cell.depth + 1;
            tree.parent.push_back(cell.node);
            tree.weight.push_back(std::ldexp(1.0, -d));
            tree.depth.push_back(d);
            if (d == cfg.max_depth || detail::all_points_equal(cloud, pts)) {
                for (const auto p : pts) tree.node_of_point[static_cast<std::size_t>(p)] = node;
            } else {
                std::vector<double> lo(dim);
                for (std::size_t k = 0; k < dim; ++k) lo[k] = cell.lo[k] + (bits[k] ? half : 0.0);
                queue.push_back({node, d, std::move(lo), std::move(pts)});
            }
        }
    }
    return tree;
}

/** Recursive farthest-point clustering tree.
 *
 *  At each internal node the first center is a seeded uniform pick from the
 *  node's points; each further center maximizes the distance to the chosen
 *  ones (ties to the lowest point index), stopping early when only
 *  duplicates remain. Points go to their nearest center (ties to the lowest
 *  center index). A child's default weight is the Euclidean distance from
 *  its center to the parent's center.
 */
inline Tree build_clustertree(const PointCloud& cloud, const ClusterTreeConfig& cfg) {
    if (cfg.branching < 2)
        throw std::invalid_argument("build_clustertree: branching must be >= 2");
    if (cfg.max_depth < 1)
        throw std::invalid_argument("build_clustertree: max_depth must be >= 1");
    Rng rng(cfg.seed);

    Tree tree;
    tree.parent.push_back(-1);
    tree.weight.push_back(0.0);
    tree.depth.push_back(0);
    tree.node_of_point.assign(cloud.n_points(), -1);

    struct Job {
        std::int32_t node;
        std::int32_t depth;
        std::int32_t center;  // point index of this cluster's center (-1 for root)
        std::vector<std::int32_t> points;
    };
    std::vector<std::int32_t> all(cloud.n_points());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int32_t>(i);
    std::deque<Job> queue;
    queue.push_back({0, 0, -1, std::move(all)});

    const auto dist = [&](std::int32_t a, std::int32_t b) {
        return ground_distance(GroundMetric::euclidean, cloud, static_cast<std::size_t>(a),
                               static_cast<std::size_t>(b));
    };

    while (!queue.empty()) {
        Job job = std::move(queue.front());
        queue.pop_front();
        const auto& pts = job.points;

        // Farthest-point center selection.
        std::vector<std::int32_t> centers;
        centers.push_back(pts[rng.below(pts.size())]);
        std::vector<double> min_dist(pts.size());
        for (std::size_t k = 0; k < pts.size(); ++k) min_dist[k] = dist(pts[k], centers[0]);
        while (static_cast<std::int32_t>(centers.size()) < cfg.branching) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < pts.size(); ++k)
                if (min_dist[k] > min_dist[best] ||
                    (min_dist[k] == min_dist[best] && pts[k] < pts[best]))
                    best = k;
            if (min_dist[best] == 0.0) break;  // only duplicates of existing centers remain
            centers.push_back(pts[best]);
            for (std::size_t k = 0; k < pts.size(); ++k)
                min_dist[k] = std::min(min_dist[k], dist(pts[k], centers.back()));
        }
        // The root's own center is its first pick; children measure their
        // weight against it.
        const std::int32_t parent_center = job.center < 0 ? centers[0] : job.center;

        std::vector<std::vector<std::int32_t>> clusters(centers.size());
        for (const auto p : pts) {
            std::size_t best = 0;
            double best_d = dist(p, centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c) {
                const double d = dist(p, centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            clusters[best].push_back(p);
        }

        for (std::size_t c = 0; c < centers.size(); ++c) {
            const auto node = static_cast<std::int32_t>(tree.n_nodes());
            const std::int32_t d = job.depth + 1;
            tree.parent.push_back(job.node);
            tree.weight.push_back(dist(centers[c], parent_center));
            tree.depth.push_back(d);
            if (d == cfg.max_depth || detail::all_points_equal(cloud, clusters[c])) {
                for (const auto p : clusters[c])
                    tree.node_of_point[static_cast<std::size_t>(p)] = node;
            } else {
                queue.push_back({node, d, centers[c], std::move(clusters[c])});
            }
        }
    }
    return tree;
}

enum class TreeMethod { quadtree, cluster };

inline TreeMethod parse_tree_method(const std::string& name) {
    if (name == "quadtree") return TreeMethod::quadtree;
    if (name == "cluster") return TreeMethod::cluster;
    throw std::invalid_argument("unknown tree method '" + name + "' (expected quadtree|cluster)");
}

struct TreeConfig {
    TreeMethod method = TreeMethod::quadtree;
    std::int32_t max_depth = 6;
    std::int32_t branching = 4;
    std::uint64_t seed = 0;
};

inline Tree build_tree(const PointCloud& cloud, const TreeConfig& cfg) {
    if (cfg.method == TreeMethod::quadtree)
        return build_quadtree(cloud, QuadTreeConfig{cfg.max_depth, cfg.seed, {}});
    return build_clustertree(cloud, ClusterTreeConfig{cfg.branching, cfg.max_depth, cfg.seed});
}

}  // namespace treew
