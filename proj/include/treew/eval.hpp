#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "treew/exact_ot.hpp"
#include "treew/measure.hpp"
#include "treew/path_features.hpp"
#include "treew/point_cloud.hpp"
#include "treew/weight_fit.hpp"

namespace treew {

struct EvalReport {
    double mae = 0.0;
    double pcc = 0.0;
    double nodes = 0.0;  // nonzero-weight node count (a mean when averaged over seeds)
    std::size_t n_pairs = 0;
    std::uint64_t seed = 0;
};

/** Mean absolute error and Pearson correlation of predicted against
 *  reference distances. */
inline EvalReport evaluate(std::span<const double> reference, std::span<const double> predicted,
                           std::size_t nodes) {
    if (reference.size() != predicted.size())
        throw std::invalid_argument("evaluate: length mismatch (" +
                                    std::to_string(reference.size()) + " vs " +
                                    std::to_string(predicted.size()) + ")");
    const std::size_t n = reference.size();
    if (n < 2) throw std::invalid_argument("evaluate: need at least two values");

    double mean_r = 0.0, mean_p = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mean_r += reference[k];
        mean_p += predicted[k];
    }
    mean_r /= static_cast<double>(n);
    mean_p /= static_cast<double>(n);

    double mae = 0.0, var_r = 0.0, var_p = 0.0, cov = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dr = reference[k] - mean_r;
        const double dp = predicted[k] - mean_p;
        mae += std::abs(reference[k] - predicted[k]);
        var_r += dr * dr;
        var_p += dp * dp;
        cov += dr * dp;
    }
    if (var_r == 0.0)
        throw std::invalid_argument("evaluate: reference has zero variance, PCC undefined");
    if (var_p == 0.0)
        throw std::invalid_argument("evaluate: prediction has zero variance, PCC undefined");

    EvalReport report;
    report.mae = mae / static_cast<double>(n);
    report.pcc = cov / std::sqrt(var_r * var_p);
    report.nodes = static_cast<double>(nodes);
    report.n_pairs = n;
    return report;
}

/** Unique unordered measure-index pairs, uniform without replacement. */
inline std::vector<std::pair<std::int32_t, std::int32_t>> sample_measure_pairs(
    std::size_t n_measures, std::size_t count, std::uint64_t seed) {
    if (n_measures < 2) throw std::invalid_argument("sample_measure_pairs: need >= 2 measures");
    if (count < 1) throw std::invalid_argument("sample_measure_pairs: need count >= 1");
    Rng rng(seed);
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    for (const auto code : detail::sample_pair_codes(n_measures, count, rng))
        pairs.push_back(detail::decode_pair(code, n_measures));
    return pairs;
}

/** Ground-metric cost matrix between two measures' support points. */
inline DenseMatrix support_cost_matrix(const PointCloud& cloud, GroundMetric metric,
                                       const Measure& mu, const Measure& nu) {
    DenseMatrix cost(mu.support_size(), nu.support_size());
    for (std::size_t i = 0; i < mu.support_size(); ++i)
        for (std::size_t j = 0; j < nu.support_size(); ++j)
            cost.at(i, j) = ground_distance(
                metric, cloud, static_cast<std::size_t>(mu.entries()[i].index),
                static_cast<std::size_t>(nu.entries()[j].index));
    return cost;
}

inline double exact_w1_between(const PointCloud& cloud, GroundMetric metric, const Measure& mu,
                               const Measure& nu) {
    return exact_w1(mu, nu, support_cost_matrix(cloud, metric, mu, nu)).value;
}

struct BenchConfig {
    TreeMethod method = TreeMethod::quadtree;
    // Fitted rows, one per value; the default-weight row always runs. Grid
    // values are per training pair: the solver's literal L1 strength is
    // lambda times the sample size, which keeps a given grid meaningful
    // regardless of how many pairs were drawn.
    std::vector<double> lambdas;
    std::int32_t slices = 1;  // T
    std::int32_t max_depth = 6;
    std::int32_t branching = 4;
    std::uint64_t fit_pairs = 100000;
    std::size_t eval_pairs = 100;
    std::int32_t n_seeds = 10;
    std::uint64_t seed = 0;
    GroundMetric metric = GroundMetric::euclidean;
    double tol = 1e-8;
    std::int32_t max_sweeps = 1000;
};

struct BenchRow {
    std::string label;
    double lambda = 0.0;  // meaningful only when fitted
    bool fitted = false;
    std::int32_t slices = 1;
    double mae = 0.0;    // means over the seed runs
    double pcc = 0.0;
    double nodes = 0.0;
};

struct BenchResult {
    std::vector<std::pair<std::int32_t, std::int32_t>> eval_pairs;
    std::vector<double> reference;                     // exact W1 per eval pair
    std::vector<BenchRow> rows;
    std::vector<std::vector<double>> first_run_predictions;  // per row, for scatter export
};

// Seed-run r uses base seed cfg.seed + 1000 r; slices within a run consume
// consecutive seeds, and the pair sample takes offset 997, so streams never
// collide for T < 997.
inline std::uint64_t bench_run_seed(std::uint64_t base, std::int32_t run) {
    return base + 1000ull * static_cast<std::uint64_t>(run);
}

/** The approximation-quality protocol: exact W1 on sampled measure pairs as
 *  the reference, then per seed run one default-weight row plus one fitted
 *  row per lambda, with MAE / PCC / nonzero node counts averaged over runs.
 *  Trees are rebuilt per run; every fitted row of a run shares the run's
 *  trees, features, and pair sample. */
inline BenchResult run_benchmark(const PointCloud& cloud, const std::vector<Measure>& measures,
                                 const BenchConfig& cfg,
                                 const std::vector<double>* cached_reference = nullptr) {
    if (cfg.slices < 1) throw std::invalid_argument("run_benchmark: need slices >= 1");
    if (cfg.n_seeds < 1) throw std::invalid_argument("run_benchmark: need n_seeds >= 1");

    BenchResult result;
    result.eval_pairs = sample_measure_pairs(measures.size(), cfg.eval_pairs, cfg.seed);

    if (cached_reference) {
        if (cached_reference->size() != result.eval_pairs.size())
            throw std::invalid_argument("run_benchmark: cached reference size mismatch");
        result.reference = *cached_reference;
    } else {
        result.reference.reserve(result.eval_pairs.size());
        for (const auto& [i, j] : result.eval_pairs)
            result.reference.push_back(
                exact_w1_between(cloud, cfg.metric, measures[static_cast<std::size_t>(i)],
                                 measures[static_cast<std::size_t>(j)]));
    }

    const std::size_t n_rows = 1 + cfg.lambdas.size();
    std::vector<double> mae_sum(n_rows, 0.0), pcc_sum(n_rows, 0.0), node_sum(n_rows, 0.0);
    result.first_run_predictions.assign(n_rows, {});

    for (std::int32_t run = 0; run < cfg.n_seeds; ++run) {
        const std::uint64_t run_seed = bench_run_seed(cfg.seed, run);
        const PairSample sample = sample_pairs(cloud, cfg.metric, cfg.fit_pairs, run_seed + 997);

        std::vector<Tree> default_trees;
        std::vector<FeatureMatrix> features;
        default_trees.reserve(static_cast<std::size_t>(cfg.slices));
        features.reserve(static_cast<std::size_t>(cfg.slices));
        for (std::int32_t t = 0; t < cfg.slices; ++t) {
            TreeConfig tree_cfg{cfg.method, cfg.max_depth, cfg.branching, slice_seed(run_seed, t)};
            default_trees.push_back(build_tree(cloud, tree_cfg));
            features.push_back(build_feature_matrix(default_trees.back(), sample));
        }

        const auto score_row = [&](std::size_t row, const std::vector<Tree>& trees) {
            std::vector<double> predicted;
            predicted.reserve(result.eval_pairs.size());
            for (const auto& [i, j] : result.eval_pairs)
                predicted.push_back(sliced_twd(trees, measures[static_cast<std::size_t>(i)],
                                               measures[static_cast<std::size_t>(j)]));
            std::size_t nodes = 0;
            for (const auto& t : trees) nodes += count_nonzero_weights(t);
            const EvalReport r = evaluate(result.reference, predicted, nodes);
            mae_sum[row] += r.mae;
            pcc_sum[row] += r.pcc;
            node_sum[row] += r.nodes;
            if (run == 0) result.first_run_predictions[row] = std::move(predicted);
        };

        score_row(0, default_trees);
        for (std::size_t l = 0; l < cfg.lambdas.size(); ++l) {
            const double literal_lambda =
                cfg.lambdas[l] * static_cast<double>(sample.pairs.size());
            FitConfig fit_cfg{literal_lambda, cfg.tol, cfg.max_sweeps, run_seed};
            std::vector<Tree> fitted;
            fitted.reserve(default_trees.size());
            for (std::size_t t = 0; t < default_trees.size(); ++t) {
                auto [w, report] = fit_weights_on_features(features[t], sample.targets,
                                                           default_trees[t].weight, fit_cfg);
                Tree tree = default_trees[t];
                tree.weight = std::move(w);
                fitted.push_back(std::move(tree));
            }
            score_row(1 + l, fitted);
        }
    }

    const bool sliced = cfg.slices > 1;
    const std::string method_default =
        cfg.method == TreeMethod::quadtree ? "quadtree" : "clustertree";
    const std::string method_fitted = cfg.method == TreeMethod::quadtree ? "qtwd" : "ctwd";
    for (std::size_t row = 0; row < n_rows; ++row) {
        BenchRow out;
        out.fitted = row > 0;
        out.slices = cfg.slices;
        out.label = (sliced ? "sliced-" : "") + (row == 0 ? method_default : method_fitted);
        if (row > 0) out.lambda = cfg.lambdas[row - 1];
        out.mae = mae_sum[row] / cfg.n_seeds;
        out.pcc = pcc_sum[row] / cfg.n_seeds;
        out.nodes = node_sum[row] / cfg.n_seeds;
        result.rows.push_back(std::move(out));
    }
    return result;
}

}  // namespace treew
