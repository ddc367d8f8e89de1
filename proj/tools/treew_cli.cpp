// treew: tree-Wasserstein distances with learned edge weights.
//
// Subcommands cover the full pipeline: build a tree over a point cloud,
// fit its edge weights by non-negative Lasso against sampled ground-metric
// distances (optionally tree-sliced), evaluate distances between measures,
// compute exact 1-Wasserstein references, and run the benchmark protocol.
// Every command is a pure function of its flags and inputs; all randomness
// flows from --seed. Exit codes: 0 success, 1 runtime failure, 2 usage.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "treew/treew.hpp"

namespace {

using namespace treew;

std::vector<std::pair<std::int32_t, std::int32_t>> load_pairs_file(const std::string& path,
                                                                   std::size_t n_items) {
    auto in = detail::open_input(path);
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 2)
            throw std::runtime_error("pairs file '" + path + "' line " + std::to_string(line_no) +
                                     ": expected 'i j'");
        const long i = detail::parse_long(toks[0], line_no, "measure index");
        const long j = detail::parse_long(toks[1], line_no, "measure index");
        if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n_items ||
            static_cast<std::size_t>(j) >= n_items)
            throw std::runtime_error("pairs file '" + path + "' line " + std::to_string(line_no) +
                                     ": index out of range");
        pairs.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
    }
    if (pairs.empty()) throw std::runtime_error("pairs file '" + path + "': no pairs");
    return pairs;
}

std::vector<std::pair<std::int32_t, std::int32_t>> all_pairs(std::size_t n) {
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            pairs.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
    return pairs;
}

void check_tree_fits_cloud(const Tree& tree, const PointCloud& cloud, const std::string& name) {
    if (tree.n_points() > cloud.n_points())
        throw std::runtime_error("tree '" + name + "' maps " + std::to_string(tree.n_points()) +
                                 " points but the vectors file has only " +
                                 std::to_string(cloud.n_points()));
    for (std::size_t p = 0; p < cloud.n_points(); ++p)
        if (p >= tree.n_points() || tree.node_of_point[p] < 0)
            throw std::runtime_error("tree '" + name + "' leaves point " + std::to_string(p) +
                                     " unmapped");
}

std::string fit_report_line(const FitReport& report) {
    return "objective=" + fmt_g17(report.objective) +
           " sweeps=" + std::to_string(report.sweeps_used) +
           " nonzeros=" + std::to_string(report.nonzero_weights) +
           " converged=" + (report.converged ? "true" : "false");
}

// ----------------------------------------------------------- subcommand state

struct BuildTreeArgs {
    std::string input, method = "quadtree", out;
    std::int32_t depth = 6, branching = 4;
    std::uint64_t seed = 0;
};

struct FitArgs {
    std::string tree, vectors, metric = "euclidean", out;
    std::uint64_t pairs = 100000, seed = 0;
    double lambda = 1e-3, tol = 1e-8;
    std::int32_t max_sweeps = 1000;
};

struct FitSlicedArgs {
    std::string method = "quadtree", vectors, metric = "euclidean", out;
    std::int32_t slices = 3, depth = 6, branching = 4, max_sweeps = 1000;
    std::uint64_t pairs = 100000, seed = 0;
    double lambda = 1e-3, tol = 1e-8;
};

struct DistArgs {
    std::vector<std::string> trees;
    std::string vectors, measures, out, pairs_file;
};

struct ExactArgs {
    std::string vectors, measures, metric = "euclidean", out;
};

struct EvalArgs {
    std::string ref, pred;
    double nodes = 0.0;
};

struct BenchArgs {
    std::string vectors, measures, method = "quadtree", metric = "euclidean", out;
    std::vector<double> lambdas{1e-3, 1e-2, 1e-1};
    std::int32_t slices = 1, depth = 6, branching = 4, runs = 10, max_sweeps = 1000;
    std::uint64_t fit_pairs = 100000, seed = 0;
    std::size_t eval_pairs = 100;
    double tol = 1e-8;
    std::string ref_cache, scatter_dir;
};

// ----------------------------------------------------------------- commands

int run_build_tree(const BuildTreeArgs& args) {
    const PointCloud cloud = load_point_cloud(args.input);
    TreeConfig cfg{parse_tree_method(args.method), args.depth, args.branching, args.seed};
    const Tree tree = build_tree(cloud, cfg);
    save_tree(args.out, tree);
    return 0;
}

// CLI lambdas are per training pair; the solver's literal L1 strength is
// lambda times the drawn sample size, so the same flag value means the same
// shrinkage pressure at any --pairs setting.
double literal_lambda(double per_pair, const PairSample& sample) {
    return per_pair * static_cast<double>(sample.pairs.size());
}

int run_fit(const FitArgs& args) {
    const PointCloud cloud = load_point_cloud(args.vectors);
    const Tree tree = load_tree(args.tree);
    check_tree_fits_cloud(tree, cloud, args.tree);
    const PairSample sample =
        sample_pairs(cloud, parse_metric(args.metric), args.pairs, args.seed);
    const FitConfig cfg{literal_lambda(args.lambda, sample), args.tol, args.max_sweeps,
                        args.seed};
    const auto [fitted, report] = fit_weights(tree, sample, cfg);
    save_tree(args.out, fitted);
    std::cout << fit_report_line(report) << '\n';
    return 0;
}

int run_fit_sliced(const FitSlicedArgs& args) {
    const PointCloud cloud = load_point_cloud(args.vectors);
    const PairSample sample =
        sample_pairs(cloud, parse_metric(args.metric), args.pairs, args.seed);
    const TreeConfig tree_cfg{parse_tree_method(args.method), args.depth, args.branching,
                              args.seed};
    const FitConfig fit_cfg{literal_lambda(args.lambda, sample), args.tol, args.max_sweeps,
                            args.seed};
    const SlicedFit fit = fit_sliced(cloud, tree_cfg, args.slices, sample, fit_cfg);
    for (std::size_t t = 0; t < fit.size(); ++t) {
        save_tree(args.out + "." + std::to_string(t), fit.trees[t]);
        std::cout << "tree=" << t << ' ' << fit_report_line(fit.reports[t]) << '\n';
    }
    return 0;
}

int run_dist(const DistArgs& args) {
    const PointCloud cloud = load_point_cloud(args.vectors);
    const std::vector<Measure> measures = load_measures(args.measures, cloud);
    std::vector<Tree> trees;
    for (const auto& path : args.trees) {
        trees.push_back(load_tree(path));
        check_tree_fits_cloud(trees.back(), cloud, path);
    }
    const auto pairs = args.pairs_file.empty() ? all_pairs(measures.size())
                                               : load_pairs_file(args.pairs_file, measures.size());
    auto out = detail::open_output(args.out);
    for (const auto& [i, j] : pairs)
        out << i << '\t' << j << '\t'
            << fmt_g17(sliced_twd(trees, measures[static_cast<std::size_t>(i)],
                                  measures[static_cast<std::size_t>(j)]))
            << '\n';
    return 0;
}

int run_exact(const ExactArgs& args) {
    const PointCloud cloud = load_point_cloud(args.vectors);
    const std::vector<Measure> measures = load_measures(args.measures, cloud);
    const GroundMetric metric = parse_metric(args.metric);
    auto out = detail::open_output(args.out);
    for (const auto& [i, j] : all_pairs(measures.size()))
        out << i << '\t' << j << '\t'
            << fmt_g17(exact_w1_between(cloud, metric, measures[static_cast<std::size_t>(i)],
                                        measures[static_cast<std::size_t>(j)]))
            << '\n';
    return 0;
}

// Reads `i j value` lines keyed by the index pair.
std::map<std::pair<long, long>, double> load_distance_tsv(const std::string& path) {
    auto in = detail::open_input(path);
    std::map<std::pair<long, long>, double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() != 3)
            throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) +
                                     ": expected 'i j value'");
        const long i = detail::parse_long(toks[0], line_no, "index");
        const long j = detail::parse_long(toks[1], line_no, "index");
        if (!values.emplace(std::make_pair(i, j), detail::parse_double(toks[2], line_no, "value"))
                 .second)
            throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) +
                                     ": duplicate pair");
    }
    if (values.empty()) throw std::runtime_error("'" + path + "': no distances");
    return values;
}

int run_eval(const EvalArgs& args) {
    const auto ref = load_distance_tsv(args.ref);
    const auto pred = load_distance_tsv(args.pred);
    if (ref.size() != pred.size())
        throw std::runtime_error("eval: pair sets differ in size (" + std::to_string(ref.size()) +
                                 " vs " + std::to_string(pred.size()) + ")");
    std::vector<double> r, p;
    for (const auto& [key, value] : ref) {
        const auto it = pred.find(key);
        if (it == pred.end())
            throw std::runtime_error("eval: pair " + std::to_string(key.first) + "," +
                                     std::to_string(key.second) + " missing from predictions");
        r.push_back(value);
        p.push_back(it->second);
    }
    const EvalReport report = evaluate(r, p, 0);
    std::cout << "mae=" << fmt_g17(report.mae) << " pcc=" << fmt_g17(report.pcc)
              << " nodes=" << fmt_g17(args.nodes) << '\n';
    return 0;
}

int run_bench(const BenchArgs& args) {
    const PointCloud cloud = load_point_cloud(args.vectors);
    const std::vector<Measure> measures = load_measures(args.measures, cloud);

    BenchConfig cfg;
    cfg.method = parse_tree_method(args.method);
    cfg.lambdas = args.lambdas;
    cfg.slices = args.slices;
    cfg.max_depth = args.depth;
    cfg.branching = args.branching;
    cfg.fit_pairs = args.fit_pairs;
    cfg.eval_pairs = args.eval_pairs;
    cfg.n_seeds = args.runs;
    cfg.seed = args.seed;
    cfg.metric = parse_metric(args.metric);
    cfg.tol = args.tol;
    cfg.max_sweeps = args.max_sweeps;

    // Exact references are the expensive part; cache them keyed by the pair
    // list so lambda-grid sweeps reuse one exact-OT pass.
    std::vector<double> cached;
    bool have_cache = false;
    const auto pairs = sample_measure_pairs(measures.size(), cfg.eval_pairs, cfg.seed);
    if (!args.ref_cache.empty() && std::filesystem::exists(args.ref_cache)) {
        const auto stored = load_distance_tsv(args.ref_cache);
        if (stored.size() != pairs.size())
            throw std::runtime_error("ref cache '" + args.ref_cache +
                                     "' does not match the sampled evaluation pairs");
        for (const auto& [i, j] : pairs) {
            const auto it = stored.find({i, j});
            if (it == stored.end())
                throw std::runtime_error("ref cache '" + args.ref_cache + "' is missing pair " +
                                         std::to_string(i) + "," + std::to_string(j));
            cached.push_back(it->second);
        }
        have_cache = true;
    }

    const BenchResult result =
        run_benchmark(cloud, measures, cfg, have_cache ? &cached : nullptr);

    if (!args.ref_cache.empty() && !have_cache) {
        auto out = detail::open_output(args.ref_cache);
        for (std::size_t k = 0; k < pairs.size(); ++k)
            out << pairs[k].first << '\t' << pairs[k].second << '\t'
                << fmt_g17(result.reference[k]) << '\n';
    }

    auto out = detail::open_output(args.out);
    out << "method\tlambda\tT\tmae\tpcc\tnodes\n";
    for (const auto& row : result.rows)
        out << row.label << '\t' << (row.fitted ? fmt_g17(row.lambda) : std::string("none"))
            << '\t' << row.slices << '\t' << fmt_g17(row.mae) << '\t' << fmt_g17(row.pcc) << '\t'
            << fmt_g17(row.nodes) << '\n';

    if (!args.scatter_dir.empty()) {
        std::filesystem::create_directories(args.scatter_dir);
        for (std::size_t r = 0; r < result.rows.size(); ++r) {
            const auto& row = result.rows[r];
            std::string name = row.label;
            if (row.fitted) name += "_lambda_" + fmt_g17(row.lambda);
            auto scatter = detail::open_output(
                (std::filesystem::path(args.scatter_dir) / (name + ".tsv")).string());
            scatter << "reference\tpredicted\n";
            for (std::size_t k = 0; k < result.reference.size(); ++k)
                scatter << fmt_g17(result.reference[k]) << '\t'
                        << fmt_g17(result.first_run_predictions[r][k]) << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tree-Wasserstein distances with learned edge weights"};
    app.require_subcommand(1);

    BuildTreeArgs build_args;
    auto* build = app.add_subcommand("build-tree", "build a tree embedding of a point cloud");
    build->add_option("--input", build_args.input, "vectors file")->required();
    build->add_option("--method", build_args.method, "quadtree|cluster")
        ->check(CLI::IsMember({"quadtree", "cluster"}));
    build->add_option("--depth", build_args.depth, "maximum depth")->check(CLI::Range(1, 64));
    build->add_option("--branching", build_args.branching, "cluster branching factor")
        ->check(CLI::Range(2, 1024));
    build->add_option("--seed", build_args.seed, "random seed");
    build->add_option("--out", build_args.out, "output tree file")->required();

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "fit edge weights by non-negative Lasso");
    fit->add_option("--tree", fit_args.tree, "input tree file")->required();
    fit->add_option("--vectors", fit_args.vectors, "vectors file")->required();
    fit->add_option("--metric", fit_args.metric, "euclidean|manhattan")
        ->check(CLI::IsMember({"euclidean", "manhattan"}));
    fit->add_option("--pairs", fit_args.pairs, "training pairs to sample")
        ->check(CLI::PositiveNumber);
    fit->add_option("--lambda", fit_args.lambda, "L1 strength per training pair")
        ->check(CLI::NonNegativeNumber);
    fit->add_option("--tol", fit_args.tol, "convergence tolerance")->check(CLI::PositiveNumber);
    fit->add_option("--max-sweeps", fit_args.max_sweeps, "sweep cap")->check(CLI::PositiveNumber);
    fit->add_option("--seed", fit_args.seed, "random seed");
    fit->add_option("--out", fit_args.out, "output tree file")->required();

    FitSlicedArgs sliced_args;
    auto* fit_sliced_cmd =
        app.add_subcommand("fit-sliced", "build and fit T trees, one file per slice");
    fit_sliced_cmd->add_option("--method", sliced_args.method, "quadtree|cluster")
        ->check(CLI::IsMember({"quadtree", "cluster"}));
    fit_sliced_cmd->add_option("--slices", sliced_args.slices, "number of trees T")
        ->check(CLI::Range(1, 1000));
    fit_sliced_cmd->add_option("--depth", sliced_args.depth, "maximum depth")
        ->check(CLI::Range(1, 64));
    fit_sliced_cmd->add_option("--branching", sliced_args.branching, "cluster branching factor")
        ->check(CLI::Range(2, 1024));
    fit_sliced_cmd->add_option("--vectors", sliced_args.vectors, "vectors file")->required();
    fit_sliced_cmd->add_option("--metric", sliced_args.metric, "euclidean|manhattan")
        ->check(CLI::IsMember({"euclidean", "manhattan"}));
    fit_sliced_cmd->add_option("--pairs", sliced_args.pairs, "training pairs to sample")
        ->check(CLI::PositiveNumber);
    fit_sliced_cmd->add_option("--lambda", sliced_args.lambda, "L1 strength per training pair")
        ->check(CLI::NonNegativeNumber);
    fit_sliced_cmd->add_option("--tol", sliced_args.tol, "convergence tolerance")
        ->check(CLI::PositiveNumber);
    fit_sliced_cmd->add_option("--max-sweeps", sliced_args.max_sweeps, "sweep cap")
        ->check(CLI::PositiveNumber);
    fit_sliced_cmd->add_option("--seed", sliced_args.seed, "random seed");
    fit_sliced_cmd->add_option("--out", sliced_args.out, "output prefix (.t appended)")
        ->required();

    DistArgs dist_args;
    auto* dist = app.add_subcommand("dist", "tree-Wasserstein distances between measures");
    dist->add_option("--trees", dist_args.trees, "tree file(s); several are averaged")
        ->required()
        ->expected(-1);
    dist->add_option("--vectors", dist_args.vectors, "vectors file")->required();
    dist->add_option("--measures", dist_args.measures, "measures file")->required();
    dist->add_option("--pairs-file", dist_args.pairs_file, "optional 'i j' pair list");
    dist->add_option("--out", dist_args.out, "output TSV")->required();

    ExactArgs exact_args;
    auto* exact = app.add_subcommand("exact-w1", "exact 1-Wasserstein distances (desk scale)");
    exact->add_option("--vectors", exact_args.vectors, "vectors file")->required();
    exact->add_option("--measures", exact_args.measures, "measures file")->required();
    exact->add_option("--metric", exact_args.metric, "euclidean|manhattan")
        ->check(CLI::IsMember({"euclidean", "manhattan"}));
    exact->add_option("--out", exact_args.out, "output TSV")->required();

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "MAE and PCC of predictions against a reference");
    eval_cmd->add_option("--ref", eval_args.ref, "reference TSV (i j value)")->required();
    eval_cmd->add_option("--pred", eval_args.pred, "prediction TSV (i j value)")->required();
    eval_cmd->add_option("--nodes", eval_args.nodes, "node count to report");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "benchmark table: default vs fitted weights");
    bench->add_option("--vectors", bench_args.vectors, "vectors file")->required();
    bench->add_option("--measures", bench_args.measures, "measures file")->required();
    bench->add_option("--method", bench_args.method, "quadtree|cluster")
        ->check(CLI::IsMember({"quadtree", "cluster"}));
    bench->add_option("--lambdas", bench_args.lambdas, "per-pair lambda grid for fitted rows")
        ->delimiter(',');
    bench->add_option("--slices", bench_args.slices, "number of trees T")
        ->check(CLI::Range(1, 1000));
    bench->add_option("--depth", bench_args.depth, "maximum depth")->check(CLI::Range(1, 64));
    bench->add_option("--branching", bench_args.branching, "cluster branching factor")
        ->check(CLI::Range(2, 1024));
    bench->add_option("--fit-pairs", bench_args.fit_pairs, "training pairs per run")
        ->check(CLI::PositiveNumber);
    bench->add_option("--eval-pairs", bench_args.eval_pairs, "measure pairs to evaluate")
        ->check(CLI::PositiveNumber);
    bench->add_option("--runs", bench_args.runs, "number of seed runs to average")
        ->check(CLI::Range(1, 1000));
    bench->add_option("--seed", bench_args.seed, "base random seed");
    bench->add_option("--metric", bench_args.metric, "euclidean|manhattan")
        ->check(CLI::IsMember({"euclidean", "manhattan"}));
    bench->add_option("--tol", bench_args.tol, "solver tolerance")->check(CLI::PositiveNumber);
    bench->add_option("--max-sweeps", bench_args.max_sweeps, "solver sweep cap")
        ->check(CLI::PositiveNumber);
    bench->add_option("--out", bench_args.out, "output table TSV")->required();
    bench->add_option("--ref-cache", bench_args.ref_cache,
                      "TSV cache for exact reference distances");
    bench->add_option("--scatter-dir", bench_args.scatter_dir,
                      "directory for reference-vs-predicted scatter TSVs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (build->parsed()) return run_build_tree(build_args);
        if (fit->parsed()) return run_fit(fit_args);
        if (fit_sliced_cmd->parsed()) return run_fit_sliced(sliced_args);
        if (dist->parsed()) return run_dist(dist_args);
        if (exact->parsed()) return run_exact(exact_args);
        if (eval_cmd->parsed()) return run_eval(eval_args);
        if (bench->parsed()) return run_bench(bench_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
