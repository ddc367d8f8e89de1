#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "treew/point_cloud.hpp"
#include "treew/tree.hpp"

namespace treew {

/** Sparse indicator z_ij = b_i + b_j - 2 b_i o b_j: the nodes on the path
 *  between the two points' nodes, excluding their lowest common ancestor and
 *  everything above it. All values are 1, so only node ids are stored. */
struct PathFeature {
    std::vector<std::int32_t> nodes;  // sorted ascending

    bool empty() const { return nodes.empty(); }

    // <w, z> = d_T(x_i, x_j) for the tree's weight vector.
    double dot(const std::vector<double>& weights) const {
        double acc = 0.0;
        for (const auto v : nodes) acc += weights[static_cast<std::size_t>(v)];
        return acc;
    }
};

inline PathFeature path_feature(const Tree& tree, std::size_t i, std::size_t j) {
    std::int32_t a = tree.node_for_point(i);
    std::int32_t b = tree.node_for_point(j);
    PathFeature z;
    while (tree.depth[a] > tree.depth[b]) {
        z.nodes.push_back(a);
        a = tree.parent[a];
    }
    while (tree.depth[b] > tree.depth[a]) {
        z.nodes.push_back(b);
        b = tree.parent[b];
    }
    while (a != b) {
        z.nodes.push_back(a);
        z.nodes.push_back(b);
        a = tree.parent[a];
        b = tree.parent[b];
    }
    std::sort(z.nodes.begin(), z.nodes.end());
    return z;
}

/** Training pairs Omega with their ground-metric targets. */
struct PairSample {
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;  // i < j, unique
    std::vector<double> targets;                               // d(x_i, x_j) per pair
    std::uint64_t seed = 0;
};

namespace detail {

// Lexicographic rank of pair (i,j), i<j, over n points; and its inverse.
inline std::uint64_t pair_rank_base(std::uint64_t i, std::uint64_t n) {
    return i * (2 * n - i - 1) / 2;
}

inline std::pair<std::int32_t, std::int32_t> decode_pair(std::uint64_t code, std::uint64_t n) {
    std::uint64_t lo = 0, hi = n - 1;  // find largest i with base(i) <= code
    while (lo < hi) {
        const std::uint64_t mid = (lo + hi + 1) / 2;
        if (pair_rank_base(mid, n) <= code)
            lo = mid;
        else
            hi = mid - 1;
    }
    const std::uint64_t i = lo;
    const std::uint64_t j = i + 1 + (code - pair_rank_base(i, n));
    return {static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)};
}

/** min(m, n(n-1)/2) distinct unordered pair codes, uniform without
 *  replacement, deterministic in the rng stream. */
inline std::vector<std::uint64_t> sample_pair_codes(std::uint64_t n, std::uint64_t m, Rng& rng) {
    const std::uint64_t total = n * (n - 1) / 2;
    std::vector<std::uint64_t> codes;
    if (m >= total) {
        codes.resize(total);
        for (std::uint64_t c = 0; c < total; ++c) codes[c] = c;
        return codes;
    }
    if (m > total / 2) {
        // Dense regime: partial Fisher-Yates over all codes.
        std::vector<std::uint64_t> pool(total);
        for (std::uint64_t c = 0; c < total; ++c) pool[c] = c;
        for (std::uint64_t t = 0; t < m; ++t)
            std::swap(pool[t], pool[t + rng.below(total - t)]);
        pool.resize(m);
        return pool;
    }
    std::unordered_set<std::uint64_t> seen;
    codes.reserve(m);
    while (codes.size() < m) {
        const std::uint64_t c = rng.below(total);
        if (seen.insert(c).second) codes.push_back(c);
    }
    return codes;
}

}  // namespace detail

inline PairSample sample_pairs(const PointCloud& cloud, GroundMetric metric, std::uint64_t m,
                               std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("sample_pairs: need m >= 1");
    Rng rng(seed);
    const std::uint64_t n = cloud.n_points();
    PairSample sample;
    sample.seed = seed;
    if (n < 2) return sample;  // no pairs exist
    for (const auto code : detail::sample_pair_codes(n, m, rng)) {
        const auto [i, j] = detail::decode_pair(code, n);
        sample.pairs.emplace_back(i, j);
        sample.targets.push_back(ground_distance(metric, cloud, static_cast<std::size_t>(i),
                                                 static_cast<std::size_t>(j)));
    }
    return sample;
}

/** All path features of a sample against one tree, stored once in row
 *  (pair) order and once as per-node row lists for column sweeps. Feature
 *  values are implicitly 1. */
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;                // tree node count
    std::vector<std::size_t> row_ptr;      // CSR offsets into col_idx
    std::vector<std::int32_t> col_idx;     // node ids per row, sorted
    std::vector<std::size_t> col_ptr;      // CSC offsets into row_idx
    std::vector<std::uint32_t> row_idx;    // pair rows per node
};

inline FeatureMatrix build_feature_matrix(const Tree& tree, const PairSample& sample) {
    FeatureMatrix fm;
    fm.n_rows = sample.pairs.size();
    fm.n_cols = tree.n_nodes();
    fm.row_ptr.reserve(fm.n_rows + 1);
    fm.row_ptr.push_back(0);
    for (const auto& [i, j] : sample.pairs) {
        const auto z = path_feature(tree, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        fm.col_idx.insert(fm.col_idx.end(), z.nodes.begin(), z.nodes.end());
        fm.row_ptr.push_back(fm.col_idx.size());
    }
    std::vector<std::size_t> counts(fm.n_cols + 1, 0);
    for (const auto v : fm.col_idx) ++counts[static_cast<std::size_t>(v) + 1];
    fm.col_ptr.resize(fm.n_cols + 1);
    fm.col_ptr[0] = 0;
    for (std::size_t c = 0; c < fm.n_cols; ++c) fm.col_ptr[c + 1] = fm.col_ptr[c] + counts[c + 1];
    fm.row_idx.resize(fm.col_idx.size());
    std::vector<std::size_t> next(fm.col_ptr.begin(), fm.col_ptr.end() - 1);
    for (std::size_t r = 0; r < fm.n_rows; ++r)
        for (std::size_t k = fm.row_ptr[r]; k < fm.row_ptr[r + 1]; ++k)
            fm.row_idx[next[static_cast<std::size_t>(fm.col_idx[k])]++] =
                static_cast<std::uint32_t>(r);
    return fm;
}

}  // namespace treew
