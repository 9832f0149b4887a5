#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "frfs/baselines.hpp"
#include "frfs/modal_oracle.hpp"

using namespace frfs;
using Catch::Approx;

namespace {

FrfTable random_table(std::size_t rows, std::uint64_t seed,
                      const std::function<double(const FeatureVector&)>& target) {
    FrfTable table;
    table.freq_hz = 100.0;
    table.node_count = static_cast<int>(rows);
    Rng rng(seed);
    for (std::size_t k = 0; k < rows; ++k) {
        FrfSample r;
        r.response_node = static_cast<int>(k);
        r.force_node = static_cast<int>(rng.below(rows));
        r.force_dir = 1 + static_cast<int>(rng.below(3));
        r.response_dir = 1 + static_cast<int>(rng.below(3));
        r.force_x = rng.uniform(0.0, 0.5);
        r.force_y = rng.uniform(0.0, 0.25);
        r.force_z = rng.uniform(0.0, 0.05);
        r.response_x = rng.uniform(0.0, 0.5);
        r.response_y = rng.uniform(0.0, 0.25);
        r.response_z = rng.uniform(0.0, 0.05);
        r.target_db = target(r.features());
        table.rows.push_back(r);
    }
    return table;
}

}  // namespace

TEST_CASE("linear model recovers exact affine ground truth", "[baselines]") {
    // y = 2 x_F + 1
    const FrfTable table =
        random_table(300, 3, [](const FeatureVector& x) { return 2.0 * x[2] + 1.0; });
    const auto [train, test] = split_half(table, 1);
    const LinearModel model = fit_linear(train);
    REQUIRE(model.weights[2] == Approx(2.0).margin(1e-8));
    REQUIRE(model.intercept == Approx(1.0).margin(1e-8));
    const std::vector<double> pred = fit_predict_linear(train, test);
    for (std::size_t k = 0; k < test.rows.size(); ++k)
        REQUIRE(pred[k] == Approx(test.rows[k].target_db).margin(1e-8));
}

TEST_CASE("linear model on a constant target is the constant", "[baselines]") {
    const FrfTable table = random_table(60, 5, [](const FeatureVector&) { return 4.5; });
    const std::vector<double> pred = fit_predict_linear(table, table);
    for (double p : pred) REQUIRE(p == Approx(4.5).margin(1e-7));
}

TEST_CASE("linear fit requires at least 9 rows", "[baselines]") {
    FrfTable tiny = random_table(8, 7, [](const FeatureVector& x) { return x[2]; });
    REQUIRE_THROWS_AS(fit_linear(tiny), std::invalid_argument);
}

TEST_CASE("knn with k=1 reproduces training rows exactly", "[baselines]") {
    const FrfTable table = random_table(150, 11, [](const FeatureVector& x) {
        return std::sin(10 * x[2]) + x[5];
    });
    const std::vector<double> pred = fit_predict_knn(table, table, 1);
    for (std::size_t k = 0; k < table.rows.size(); ++k)
        REQUIRE(pred[k] == table.rows[k].target_db);
}

TEST_CASE("knn with k equal to the training size predicts the global mean", "[baselines]") {
    const FrfTable table = random_table(80, 13, [](const FeatureVector& x) { return x[2] - x[6]; });
    double mean = 0.0;
    for (const auto& r : table.rows) mean += r.target_db;
    mean /= static_cast<double>(table.rows.size());
    const std::vector<double> pred =
        fit_predict_knn(table, table, static_cast<int>(table.rows.size()));
    for (double p : pred) REQUIRE(p == Approx(mean).epsilon(1e-12));
}

TEST_CASE("knn validates k", "[baselines]") {
    const FrfTable table = random_table(20, 17, [](const FeatureVector& x) { return x[2]; });
    REQUIRE_THROWS_AS(fit_predict_knn(table, table, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_predict_knn(table, table, 21), std::invalid_argument);
}

TEST_CASE("knn copes with zero-variance features", "[baselines]") {
    FrfTable table = random_table(40, 19, [](const FeatureVector& x) { return x[2]; });
    for (auto& r : table.rows) {
        r.force_z = 0.01;  // constant column
        r.target_db = r.force_x;
    }
    const std::vector<double> pred = fit_predict_knn(table, table, 1);
    for (std::size_t k = 0; k < table.rows.size(); ++k)
        REQUIRE(pred[k] == table.rows[k].target_db);
}

TEST_CASE("knn parallel equals sequential", "[baselines]") {
    const FrfTable table = random_table(200, 23, [](const FeatureVector& x) {
        return std::cos(8 * x[2]) * x[6];
    });
    const auto [train, test] = split_half(table, 2);
    REQUIRE(fit_predict_knn(train, test, 5, 1) == fit_predict_knn(train, test, 5, 8));
}

TEST_CASE("benchmark contract: four rows, R in range, sorted by error", "[baselines]") {
    OracleConfig cfg;
    cfg.grid_nx = 4;
    cfg.grid_ny = 3;
    cfg.grid_nz = 2;
    cfg.mode_count = 8;
    cfg.seed = 3;
    const FrfTable table = dataset_at_frequency(build_structure(cfg), 100.0);
    BenchmarkParams bench;
    bench.forest.tree_count = 20;
    const BenchmarkResult result = run_benchmark(table, 42, bench);
    REQUIRE(result.rows.size() == 4);
    for (const auto& row : result.rows) {
        if (!row.eval.constant_truth) {
            REQUIRE(row.eval.r >= -1.0);
            REQUIRE(row.eval.r <= 1.0);
        }
        REQUIRE(row.eval.rmse_rel >= 0.0);
        REQUIRE(row.seconds >= 0.0);
    }
    for (std::size_t k = 1; k < result.rows.size(); ++k)
        REQUIRE(result.rows[k - 1].eval.rmse_rel <= result.rows[k].eval.rmse_rel);

    // determinism apart from wall time
    const BenchmarkResult again = run_benchmark(table, 42, bench);
    for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(result.rows[k].model == again.rows[k].model);
        REQUIRE(result.rows[k].eval.rmse_rel == again.rows[k].eval.rmse_rel);
        if (!result.rows[k].eval.constant_truth)
            REQUIRE(result.rows[k].eval.r == again.rows[k].eval.r);
    }
}

TEST_CASE("benchmark on FRF data: trees beat knn beats linear", "[baselines]") {
    OracleConfig cfg;
    cfg.grid_nx = 5;
    cfg.grid_ny = 4;
    cfg.grid_nz = 2;
    cfg.mode_count = 12;
    cfg.seed = 11;
    const FrfTable table = dataset_at_frequency(build_structure(cfg), 100.0);
    BenchmarkParams bench;
    bench.forest.tree_count = 30;
    const BenchmarkResult result = run_benchmark(table, 7, bench);
    double linear_err = 0, knn_err = 0, et_err = 0;
    for (const auto& row : result.rows) {
        if (row.model == "linear") linear_err = row.eval.rmse_rel;
        if (row.model == "knn") knn_err = row.eval.rmse_rel;
        if (row.model == "extra_trees") et_err = row.eval.rmse_rel;
    }
    REQUIRE(et_err < knn_err);
    REQUIRE(knn_err < linear_err);
    REQUIRE(result.rows.back().model == "linear");
}

TEST_CASE("benchmark flags R as undefined on a constant-target table", "[baselines]") {
    const FrfTable table = random_table(120, 29, [](const FeatureVector&) { return 3.0; });
    BenchmarkParams bench;
    bench.forest.tree_count = 5;
    const BenchmarkResult result = run_benchmark(table, 1, bench);
    for (const auto& row : result.rows) {
        REQUIRE(row.eval.constant_truth);
        REQUIRE(row.eval.rmse_rel == Approx(0.0).margin(1e-7));
    }
}

TEST_CASE("benchmark rejects tiny tables", "[baselines]") {
    const FrfTable table = random_table(50, 31, [](const FeatureVector& x) { return x[2]; });
    REQUIRE_THROWS_AS(run_benchmark(table, 0), std::invalid_argument);
}
