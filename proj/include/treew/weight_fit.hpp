#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "treew/path_features.hpp"
#include "treew/tree.hpp"
#include "treew/tree_build.hpp"

namespace treew {

struct FitConfig {
    double lambda = 0.0;        // L1 strength, >= 0
    double tol = 1e-8;          // max |coordinate change| per sweep to stop
    std::int32_t max_sweeps = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lambda >= 0.0)) throw std::invalid_argument("FitConfig: lambda must be >= 0");
        if (!(tol > 0.0)) throw std::invalid_argument("FitConfig: tol must be > 0");
        if (max_sweeps < 1) throw std::invalid_argument("FitConfig: max_sweeps must be >= 1");
    }
};

struct FitReport {
    double objective = 0.0;          // sum of squared residuals + lambda * ||w||_1
    std::int32_t sweeps_used = 0;
    std::size_t nonzero_weights = 0;
    bool converged = false;
    std::vector<double> objective_by_sweep;  // recorded after each sweep

    bool operator==(const FitReport&) const = default;
};

// Weights at or below this magnitude after the solve are snapped to exact
// zero, which makes node counts and pruning well defined.
inline constexpr double kWeightTruncation = 1e-12;

/** Smallest lambda for which the non-negative Lasso solution is all zero:
 *  2 * max_k sum over pairs containing node k of the target distance. */
inline double lambda_max(const FeatureMatrix& features, const std::vector<double>& targets) {
    double best = 0.0;
    for (std::size_t k = 0; k < features.n_cols; ++k) {
        double corr = 0.0;
        for (std::size_t e = features.col_ptr[k]; e < features.col_ptr[k + 1]; ++e)
            corr += targets[features.row_idx[e]];
        best = std::max(best, 2.0 * corr);
    }
    return best;
}

namespace detail {

inline double fit_objective(const std::vector<double>& residual, const std::vector<double>& w,
                            double lambda) {
    double rss = 0.0;
    for (const double r : residual) rss += r * r;
    double l1 = 0.0;
    for (const double v : w) l1 += v;
    return rss + lambda * l1;
}

}  // namespace detail

/** Non-negative Lasso fit of edge weights on precomputed features.
 *
 *  Minimizes sum over pairs of (d_ij - <w, z_ij>)^2 + lambda * ||w||_1
 *  subject to w >= 0, by cyclic coordinate descent with maintained
 *  residuals. Each coordinate step is the exact one-dimensional minimizer
 *      w_k <- max(0, (r_k + a_k w_k - lambda/2) / a_k),
 *  with a_k the number of pairs through node k and r_k the residual
 *  correlation of its column, so the objective never increases. Nodes on no
 *  sampled path (the root in particular) are pinned to zero.
 */
inline std::pair<std::vector<double>, FitReport> fit_weights_on_features(
    const FeatureMatrix& features, const std::vector<double>& targets,
    const std::vector<double>& initial, const FitConfig& cfg) {
    cfg.validate();
    if (features.n_rows == 0) throw std::invalid_argument("fit: empty pair sample");
    if (targets.size() != features.n_rows)
        throw std::invalid_argument("fit: target/feature row mismatch");
    for (const double t : targets)
        if (!std::isfinite(t)) throw std::invalid_argument("fit: non-finite target");
    if (initial.size() != features.n_cols)
        throw std::invalid_argument("fit: initial weights sized for a different tree");

    const std::size_t n_cols = features.n_cols;
    std::vector<double> w = initial;
    std::vector<std::size_t> active;  // columns with a_k > 0, cyclic order
    active.reserve(n_cols);
    for (std::size_t k = 0; k < n_cols; ++k) {
        if (features.col_ptr[k + 1] > features.col_ptr[k])
            active.push_back(k);
        else
            w[k] = 0.0;  // unobserved column; L1 pins it at zero
    }

    std::vector<double> residual(targets);
    for (const auto k : active) {
        if (w[k] == 0.0) continue;
        for (std::size_t e = features.col_ptr[k]; e < features.col_ptr[k + 1]; ++e)
            residual[features.row_idx[e]] -= w[k];
    }

    FitReport report;
    report.objective_by_sweep.reserve(16);
    double prev_objective = detail::fit_objective(residual, w, cfg.lambda);
    bool converged = false;
    std::int32_t sweep = 0;
    while (sweep < cfg.max_sweeps && !converged) {
        ++sweep;
        double max_delta = 0.0;
        for (const auto k : active) {
            const double a_k = static_cast<double>(features.col_ptr[k + 1] - features.col_ptr[k]);
            double r_k = 0.0;
            for (std::size_t e = features.col_ptr[k]; e < features.col_ptr[k + 1]; ++e)
                r_k += residual[features.row_idx[e]];
            const double updated = std::max(0.0, (r_k + a_k * w[k] - 0.5 * cfg.lambda) / a_k);
            const double delta = updated - w[k];
            if (delta != 0.0) {
                for (std::size_t e = features.col_ptr[k]; e < features.col_ptr[k + 1]; ++e)
                    residual[features.row_idx[e]] -= delta;
                w[k] = updated;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        const double objective = detail::fit_objective(residual, w, cfg.lambda);
        // Exact coordinate minimization cannot increase the objective; allow
        // only accumulation roundoff.
        if (objective > prev_objective + 1e-9 * (1.0 + std::abs(prev_objective)))
            throw std::logic_error("fit: objective increased during a sweep");
        report.objective_by_sweep.push_back(objective);
        prev_objective = objective;
        converged = max_delta <= cfg.tol;
    }

    bool truncated = false;
    for (auto& v : w)
        if (v != 0.0 && v <= kWeightTruncation) {
            v = 0.0;
            truncated = true;
        }
    if (truncated) {  // refresh residuals so the reported objective matches w
        residual = targets;
        for (std::size_t r = 0; r < features.n_rows; ++r)
            for (std::size_t e = features.row_ptr[r]; e < features.row_ptr[r + 1]; ++e)
                residual[r] -= w[static_cast<std::size_t>(features.col_idx[e])];
    }

    report.sweeps_used = sweep;
    report.converged = converged;
    report.objective = detail::fit_objective(residual, w, cfg.lambda);
    for (const double v : w)
        if (v != 0.0) ++report.nonzero_weights;
    return {std::move(w), report};
}

/** Fits a tree's edge weights against the sample's ground-metric targets.
 *  The tree's current (builder default) weights serve as the warm start. */
inline std::pair<Tree, FitReport> fit_weights(const Tree& tree, const PairSample& sample,
                                              const FitConfig& cfg) {
    const FeatureMatrix features = build_feature_matrix(tree, sample);
    auto [w, report] = fit_weights_on_features(features, sample.targets, tree.weight, cfg);
    Tree fitted = tree;
    fitted.weight = std::move(w);
    return {std::move(fitted), report};
}

/** A family of independently built and fitted trees; distances are averaged. */
struct SlicedFit {
    std::vector<Tree> trees;
    std::vector<FitReport> reports;

    std::size_t size() const { return trees.size(); }
    std::size_t total_nonzero_weights() const {
        std::size_t c = 0;
        for (const auto& t : trees) c += count_nonzero_weights(t);
        return c;
    }
};

// Seed of the t-th slice: consecutive per-slice seeds so that T=1 reduces
// exactly to the single-tree pipeline with the base seed.
inline std::uint64_t slice_seed(std::uint64_t base, std::int32_t t) {
    return base + static_cast<std::uint64_t>(t);
}

/** Builds T trees with per-slice seeds and fits each on the same sample. */
inline SlicedFit fit_sliced(const PointCloud& cloud, const TreeConfig& base_cfg, std::int32_t T,
                            const PairSample& sample, const FitConfig& fit_cfg) {
    if (T < 1) throw std::invalid_argument("fit_sliced: need T >= 1");
    SlicedFit fit;
    fit.trees.reserve(static_cast<std::size_t>(T));
    fit.reports.reserve(static_cast<std::size_t>(T));
    for (std::int32_t t = 0; t < T; ++t) {
        TreeConfig cfg = base_cfg;
        cfg.seed = slice_seed(base_cfg.seed, t);
        auto [tree, report] = fit_weights(build_tree(cloud, cfg), sample, fit_cfg);
        fit.trees.push_back(std::move(tree));
        fit.reports.push_back(std::move(report));
    }
    return fit;
}

/** Tree-sliced distance: the arithmetic mean of the per-tree distances. */
inline double sliced_twd(const std::vector<Tree>& trees, const Measure& mu, const Measure& nu) {
    if (trees.empty()) throw std::invalid_argument("sliced_twd: no trees");
    double total = 0.0;
    for (const auto& tree : trees) total += twd(tree, mu, nu);
    return total / static_cast<double>(trees.size());
}

inline double sliced_twd(const SlicedFit& fit, const Measure& mu, const Measure& nu) {
    return sliced_twd(fit.trees, mu, nu);
}

}  // namespace treew
