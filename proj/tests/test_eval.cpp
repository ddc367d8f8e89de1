#include <doctest.h>

#include <set>

#include "support.hpp"
#include "treew/eval.hpp"

using namespace treew;

TEST_CASE("evaluate on identical vectors") {
    const std::vector<double> ref{0.5, 1.0, 2.0};
    const EvalReport r = evaluate(ref, ref, 17);
    CHECK(r.mae == 0.0);
    CHECK(r.pcc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.nodes == 17.0);
    CHECK(r.n_pairs == 3);
}

TEST_CASE("evaluate under a positive affine transform") {
    const std::vector<double> ref{0.5, 1.0, 2.0, 0.25};
    std::vector<double> pred;
    double expected_mae = 0.0;
    for (const double v : ref) {
        pred.push_back(2.0 * v + 5.0);
        expected_mae += std::abs(v + 5.0);
    }
    expected_mae /= static_cast<double>(ref.size());
    const EvalReport r = evaluate(ref, pred, 0);
    CHECK(r.pcc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.mae == doctest::Approx(expected_mae).epsilon(1e-12));
}

TEST_CASE("evaluate hand-computed anti-correlated case") {
    const std::vector<double> ref{1.0, 2.0, 3.0};
    const std::vector<double> pred{3.0, 2.0, 1.0};
    const EvalReport r = evaluate(ref, pred, 0);
    CHECK(r.mae == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(r.pcc == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("evaluate rejects bad input") {
    const std::vector<double> ref{1.0, 2.0};
    CHECK_THROWS_AS(evaluate(ref, std::vector<double>{1.0}, 0), std::invalid_argument);
    CHECK_THROWS_AS(evaluate(std::vector<double>{1.0}, std::vector<double>{1.0}, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(evaluate(std::vector<double>{2.0, 2.0}, ref, 0), std::invalid_argument);
    CHECK_THROWS_AS(evaluate(ref, std::vector<double>{2.0, 2.0}, 0), std::invalid_argument);
}

TEST_CASE("PCC is invariant under positive affine transforms of either side") {
    Rng rng(21);
    std::vector<double> ref(20), pred(20);
    for (auto& v : ref) v = rng.unit();
    for (auto& v : pred) v = rng.unit();
    const double base = evaluate(ref, pred, 0).pcc;
    for (int trial = 0; trial < 10; ++trial) {
        const double a = 0.1 + rng.unit() * 5.0, b = rng.unit() * 10.0 - 5.0;
        std::vector<double> scaled = pred;
        for (auto& v : scaled) v = a * v + b;
        CHECK(evaluate(ref, scaled, 0).pcc == doctest::Approx(base).epsilon(1e-10));
        std::vector<double> scaled_ref = ref;
        for (auto& v : scaled_ref) v = a * v + b;
        CHECK(evaluate(scaled_ref, pred, 0).pcc == doctest::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("MAE is symmetric and zero only on equal vectors") {
    Rng rng(22);
    std::vector<double> x(12), y(12);
    for (auto& v : x) v = rng.unit();
    for (auto& v : y) v = rng.unit();
    CHECK(evaluate(x, y, 0).mae == evaluate(y, x, 0).mae);
    CHECK(evaluate(x, y, 0).mae > 0.0);
    CHECK(evaluate(x, x, 0).mae == 0.0);
}

TEST_CASE("sample_measure_pairs behaves like the pair sampler") {
    const auto all = sample_measure_pairs(3, 100, 5);
    CHECK(all.size() == 3);
    CHECK(sample_measure_pairs(200, 100, 9) == sample_measure_pairs(200, 100, 9));
    const auto hundred = sample_measure_pairs(200, 100, 9);
    CHECK(hundred.size() == 100);
    std::set<std::pair<std::int32_t, std::int32_t>> seen(hundred.begin(), hundred.end());
    CHECK(seen.size() == 100);
    CHECK_THROWS_AS(sample_measure_pairs(1, 10, 0), std::invalid_argument);
}

TEST_CASE("run_benchmark: deterministic rows with the expected shape") {
    Rng rng(31);
    const PointCloud cloud = testsupport::random_cloud(24, 3, rng);
    std::vector<Measure> measures;
    for (int k = 0; k < 8; ++k) measures.push_back(testsupport::random_measure(24, 5, rng));

    BenchConfig cfg;
    cfg.method = TreeMethod::quadtree;
    cfg.lambdas = {1e-3, 1e-1};
    cfg.slices = 1;
    cfg.max_depth = 4;
    cfg.fit_pairs = 150;
    cfg.eval_pairs = 10;
    cfg.n_seeds = 2;
    cfg.seed = 7;

    const BenchResult a = run_benchmark(cloud, measures, cfg);
    const BenchResult b = run_benchmark(cloud, measures, cfg);
    REQUIRE(a.rows.size() == 3);
    CHECK(a.rows[0].label == "quadtree");
    CHECK(!a.rows[0].fitted);
    CHECK(a.rows[1].label == "qtwd");
    CHECK(a.rows[1].lambda == 1e-3);
    CHECK(a.rows[2].lambda == 1e-1);
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        CHECK(a.rows[r].mae == b.rows[r].mae);
        CHECK(a.rows[r].pcc == b.rows[r].pcc);
        CHECK(a.rows[r].nodes == b.rows[r].nodes);
    }
    CHECK(a.reference == b.reference);

    SUBCASE("a cached reference is accepted and reused") {
        const BenchResult c = run_benchmark(cloud, measures, cfg, &a.reference);
        CHECK(c.rows[1].mae == a.rows[1].mae);
    }
    SUBCASE("sliced labels get the prefix") {
        cfg.slices = 3;
        cfg.n_seeds = 1;
        const BenchResult c = run_benchmark(cloud, measures, cfg);
        CHECK(c.rows[0].label == "sliced-quadtree");
        CHECK(c.rows[1].label == "sliced-qtwd");
    }
}
