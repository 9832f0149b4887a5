#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "frfs/dataset.hpp"
#include "frfs/metrics.hpp"
#include "frfs/parallel.hpp"
#include "frfs/trees.hpp"

namespace frfs {

struct BenchmarkRow {
    std::string model;
    EvalResult eval;
    double seconds = 0.0;  // train + predict wall time; reported, never asserted
};

/// Affine model y = w . x + b fitted by least squares.
struct LinearModel {
    std::array<double, kFeatureCount> weights{};
    double intercept = 0.0;

    double predict(const FeatureVector& x) const {
        double y = intercept;
        for (int f = 0; f < kFeatureCount; ++f)
            y += weights[static_cast<std::size_t>(f)] * x[static_cast<std::size_t>(f)];
        return y;
    }
};

/// Ordinary least squares via normal equations. A 1e-10 ridge jitter on the
/// diagonal keeps rank-deficient designs solvable.
inline LinearModel fit_linear(const FrfTable& train) {
    constexpr int dim = kFeatureCount + 1;  // features + intercept
    if (train.rows.size() < static_cast<std::size_t>(dim))
        throw std::invalid_argument("fit_linear: need at least 9 rows");

    std::array<std::array<double, dim>, dim> ata{};
    std::array<double, dim> atb{};
    for (const auto& row : train.rows) {
        std::array<double, dim> x;
        const FeatureVector feats = row.features();
        for (int f = 0; f < kFeatureCount; ++f) x[static_cast<std::size_t>(f)] = feats[static_cast<std::size_t>(f)];
        x[kFeatureCount] = 1.0;
        for (int a = 0; a < dim; ++a) {
            for (int b = a; b < dim; ++b)
                ata[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
                    x[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(b)];
            atb[static_cast<std::size_t>(a)] += x[static_cast<std::size_t>(a)] * row.target_db;
        }
    }
    for (int a = 0; a < dim; ++a) {
        ata[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)] += 1e-10;
        for (int b = 0; b < a; ++b)
            ata[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                ata[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)];
    }

    // Cholesky decomposition; the jitter makes the matrix positive definite
    // unless the design itself is pathological.
    std::array<std::array<double, dim>, dim> chol{};
    for (int a = 0; a < dim; ++a) {
        for (int b = 0; b <= a; ++b) {
            double s = ata[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            for (int k = 0; k < b; ++k)
                s -= chol[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] *
                     chol[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)];
            if (a == b) {
                if (s <= 0.0)
                    throw std::runtime_error("fit_linear: degenerate design even after jitter");
                chol[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = std::sqrt(s);
            } else {
                chol[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                    s / chol[static_cast<std::size_t>(b)][static_cast<std::size_t>(b)];
            }
        }
    }
    std::array<double, dim> y{};
    for (int a = 0; a < dim; ++a) {
        double s = atb[static_cast<std::size_t>(a)];
        for (int k = 0; k < a; ++k)
            s -= chol[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(k)];
        y[static_cast<std::size_t>(a)] = s / chol[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)];
    }
    std::array<double, dim> coef{};
    for (int a = dim - 1; a >= 0; --a) {
        double s = y[static_cast<std::size_t>(a)];
        for (int k = a + 1; k < dim; ++k)
            s -= chol[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)] * coef[static_cast<std::size_t>(k)];
        coef[static_cast<std::size_t>(a)] = s / chol[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)];
    }

    LinearModel model;
    for (int f = 0; f < kFeatureCount; ++f) model.weights[static_cast<std::size_t>(f)] = coef[static_cast<std::size_t>(f)];
    model.intercept = coef[kFeatureCount];
    return model;
}

inline std::vector<double> fit_predict_linear(const FrfTable& train, const FrfTable& test) {
    const LinearModel model = fit_linear(train);
    std::vector<double> out;
    out.reserve(test.rows.size());
    for (const auto& row : test.rows) out.push_back(model.predict(row.features()));
    return out;
}

/// k-nearest-neighbour regression on train-standardized features, Euclidean
/// distance, distance ties broken by the lower training-row index.
inline std::vector<double> fit_predict_knn(const FrfTable& train, const FrfTable& test, int k,
                                           int threads = 1) {
    const std::size_t n = train.rows.size();
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("fit_predict_knn: k out of range");

    std::array<double, kFeatureCount> mean{}, sdev{};
    for (const auto& row : train.rows) {
        const FeatureVector x = row.features();
        for (int f = 0; f < kFeatureCount; ++f) mean[static_cast<std::size_t>(f)] += x[static_cast<std::size_t>(f)];
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    for (const auto& row : train.rows) {
        const FeatureVector x = row.features();
        for (int f = 0; f < kFeatureCount; ++f) {
            const double d = x[static_cast<std::size_t>(f)] - mean[static_cast<std::size_t>(f)];
            sdev[static_cast<std::size_t>(f)] += d * d;
        }
    }
    for (auto& s : sdev) s = std::max(std::sqrt(s / static_cast<double>(n)), 1e-12);

    std::vector<double> train_std(n * kFeatureCount);
    std::vector<double> train_y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const FeatureVector x = train.rows[i].features();
        for (int f = 0; f < kFeatureCount; ++f)
            train_std[i * kFeatureCount + static_cast<std::size_t>(f)] =
                (x[static_cast<std::size_t>(f)] - mean[static_cast<std::size_t>(f)]) / sdev[static_cast<std::size_t>(f)];
        train_y[i] = train.rows[i].target_db;
    }

    std::vector<double> out(test.rows.size());
    parallel_for(test.rows.size(), threads, [&](std::size_t t) {
        std::array<double, kFeatureCount> q;
        const FeatureVector x = test.rows[t].features();
        for (int f = 0; f < kFeatureCount; ++f)
            q[static_cast<std::size_t>(f)] =
                (x[static_cast<std::size_t>(f)] - mean[static_cast<std::size_t>(f)]) / sdev[static_cast<std::size_t>(f)];

        // Max-heap of the current k best as (distance, index); a candidate
        // replaces the worst on strictly smaller distance, or on equal
        // distance with a smaller index.
        std::vector<std::pair<double, std::size_t>> heap;
        heap.reserve(static_cast<std::size_t>(k));
        const auto cmp = [](const auto& a, const auto& b) { return a < b; };
        for (std::size_t i = 0; i < n; ++i) {
            double dist = 0.0;
            const double* row = &train_std[i * kFeatureCount];
            for (int f = 0; f < kFeatureCount; ++f) {
                const double d = row[f] - q[static_cast<std::size_t>(f)];
                dist += d * d;
            }
            if (heap.size() < static_cast<std::size_t>(k)) {
                heap.emplace_back(dist, i);
                std::push_heap(heap.begin(), heap.end(), cmp);
            } else if (std::make_pair(dist, i) < heap.front()) {
                std::pop_heap(heap.begin(), heap.end(), cmp);
                heap.back() = {dist, i};
                std::push_heap(heap.begin(), heap.end(), cmp);
            }
        }
        double sum = 0.0;
        for (const auto& [dist, idx] : heap) sum += train_y[idx];
        out[t] = sum / static_cast<double>(heap.size());
    });
    return out;
}

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;  // sorted by RMSE-r ascending
    FeatureImportance extra_trees_importance;
};

struct BenchmarkParams {
    int knn_k = 5;
    ForestParams forest;  // split_mode is overridden per model below
};

/// Table-style comparison of the untuned models on a seeded half split.
inline BenchmarkResult run_benchmark(const FrfTable& table, std::uint64_t seed,
                                     const BenchmarkParams& params = {}, int threads = 1) {
    if (table.rows.size() < 100)
        throw std::invalid_argument("run_benchmark: need at least 100 rows");
    const auto [train, test] = split_half(table, substream(seed, {0x5B117u}));
    const std::vector<double> truth = test.targets();

    BenchmarkResult result;
    const auto timed = [&](const std::string& name, auto&& fn) {
        const auto start = std::chrono::steady_clock::now();
        const std::vector<double> pred = fn();
        const auto stop = std::chrono::steady_clock::now();
        BenchmarkRow row;
        row.model = name;
        row.eval = evaluate(truth, pred);
        row.seconds = std::chrono::duration<double>(stop - start).count();
        result.rows.push_back(std::move(row));
    };

    timed("linear", [&] { return fit_predict_linear(train, test); });
    timed("knn", [&] { return fit_predict_knn(train, test, params.knn_k, threads); });
    timed("random_forest", [&] {
        ForestParams fp = params.forest;
        fp.split_mode = SplitMode::kBestExhaustive;
        fp.seed = substream(seed, {0x2F04E57u});
        return fit_forest(train, fp, threads).predict_table(test, threads);
    });
    timed("extra_trees", [&] {
        ForestParams fp = params.forest;
        fp.split_mode = SplitMode::kExtraRandom;
        fp.seed = substream(seed, {0xE772EE5u});
        ForestModel model = fit_forest(train, fp, threads);
        result.extra_trees_importance = model.feature_importance();
        return model.predict_table(test, threads);
    });

    std::stable_sort(result.rows.begin(), result.rows.end(),
                     [](const BenchmarkRow& a, const BenchmarkRow& b) {
                         return a.eval.rmse_rel < b.eval.rmse_rel;
                     });
    return result;
}

}  // namespace frfs
