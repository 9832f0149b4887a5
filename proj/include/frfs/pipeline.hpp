#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "frfs/baselines.hpp"
#include "frfs/dataset.hpp"
#include "frfs/ga_select.hpp"
#include "frfs/metrics.hpp"
#include "frfs/modal_oracle.hpp"
#include "frfs/trees.hpp"

namespace frfs {

struct PipelineConfig {
    OracleConfig oracle;
    double seed_freq_hz = 100.0;
    std::vector<double> target_freqs_hz = {50.0, 70.0, 98.0, 102.0, 120.0, 150.0};
    std::vector<double> tolerance_list = {0.8, 0.7, 0.5, 0.3};
    GaParams ga;
    ForestParams final_forest;
    BenchmarkParams benchmark;
    int random_trials = 10;
    std::uint64_t master_seed = 42;
    std::string output_dir = "out";
    int threads = 0;  // 0 = hardware concurrency
};

namespace detail {
inline void validate(const PipelineConfig& cfg) {
    if (!(cfg.seed_freq_hz > 0))
        throw std::invalid_argument("pipeline: seed frequency must be positive");
    for (double f : cfg.target_freqs_hz)
        if (!(f > 0)) throw std::invalid_argument("pipeline: target frequencies must be positive");
    for (double rt : cfg.tolerance_list)
        if (!(rt > 0)) throw std::invalid_argument("pipeline: r_t values must be positive");
    if (cfg.target_freqs_hz.empty())
        throw std::invalid_argument("pipeline: target frequency list is empty");
    if (cfg.tolerance_list.empty())
        throw std::invalid_argument("pipeline: r_t list is empty");
}
}  // namespace detail

/// Eq-3 style extrapolation: the transfer error scales with the ratio of the
/// evaluation frequency to the seed frequency.
inline double estimate_error(double seed_rmse, double freq_hz, double seed_freq_hz) {
    if (!(seed_freq_hz > 0)) throw std::invalid_argument("estimate_error: seed frequency must be positive");
    return seed_rmse * freq_hz / seed_freq_hz;
}

struct GaRunSummary {
    double r_t = 0.0;
    Individual best;
    GaHistory history;
    double reduction = 0.0;  // N^2 / q
};

struct SeedStage {
    StructureModel model;
    FrfTable seed_table;
    FrfTable holdout;
    BenchmarkResult benchmark;
    std::vector<GaRunSummary> ga_runs;  // one per r_t, in list order
    // Adjacent r_t pairs where a larger tolerance did not get the smaller
    // subset; stochastic, so logged rather than enforced.
    std::vector<std::pair<int, int>> rt_q_violations;
};

/// Seed-frequency stage: full table, model comparison, one GA per r_t.
inline SeedStage run_seed_stage(const PipelineConfig& cfg) {
    detail::validate(cfg);
    SeedStage stage;
    OracleConfig oracle = cfg.oracle;
    oracle.seed = substream(cfg.master_seed, {0x02ACu});
    stage.model = build_structure(oracle);
    stage.seed_table = dataset_at_frequency(stage.model, cfg.seed_freq_hz, cfg.threads);
    stage.holdout = make_holdout(stage.seed_table, cfg.ga.holdout_size,
                                 substream(cfg.master_seed, {0x401Du}));
    stage.benchmark = run_benchmark(stage.seed_table, substream(cfg.master_seed, {0xBE7Cu}),
                                    cfg.benchmark, cfg.threads);

    const double n_pairs = static_cast<double>(stage.model.node_count()) *
                           static_cast<double>(stage.model.node_count());
    for (std::size_t t = 0; t < cfg.tolerance_list.size(); ++t) {
        GaParams ga = cfg.ga;
        ga.tolerance = cfg.tolerance_list[t];
        ga.seed = substream(cfg.master_seed, {0x6A0u, t});
        GaOutcome outcome = evolve(stage.seed_table, stage.holdout, ga, cfg.threads);
        GaRunSummary summary{ga.tolerance, std::move(outcome.best), std::move(outcome.history), 0.0};
        if (summary.best.q() > 0) summary.reduction = n_pairs / static_cast<double>(summary.best.q());
        stage.ga_runs.push_back(std::move(summary));
    }
    for (std::size_t t = 0; t + 1 < stage.ga_runs.size(); ++t) {
        if (cfg.tolerance_list[t] > cfg.tolerance_list[t + 1] &&
            stage.ga_runs[t].best.q() > stage.ga_runs[t + 1].best.q())
            stage.rt_q_violations.emplace_back(static_cast<int>(t), static_cast<int>(t + 1));
    }
    return stage;
}

struct FrequencyResult {
    double freq_hz = 0.0;
    double r_t = 0.0;
    std::size_t q = 0;
    double reduction = 0.0;      // N^2 / q; FEA-equivalent rows computed = 9q of 9N^2
    double rmse_actual = 0.0;
    double r_actual = 0.0;
    bool r_defined = true;
    double rmse_estimate = 0.0;  // Eq-3 extrapolation from the seed-stage error
    double random_mean = 0.0;    // same-q random-subset baseline over `trials`
    double random_std = 0.0;
    std::vector<double> predictions;  // aligned with the full truth table rows
};

struct TransferContext {
    const StructureModel& model;
    const FrfTable& truth;  // full 9N^2 table at the transfer frequency
    double seed_freq_hz = 0.0;
    double ga_seed_err = 0.0;  // the GA's achieved RMSE-r at the seed frequency
    ForestParams forest;
    int trials = 10;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Same-q random-subset baseline: mean and sample stddev of the transfer
/// RMSE-r over `trials` uniformly random genomes.
inline std::pair<double, double> compare_random(std::size_t q, const TransferContext& ctx) {
    if (ctx.trials < 3) throw std::invalid_argument("compare_random: need at least 3 trials");
    if (q == 0) throw std::invalid_argument("compare_random: q must be positive");
    const std::vector<double> truth_targets = ctx.truth.targets();
    std::vector<double> errs(static_cast<std::size_t>(ctx.trials));
    parallel_for(errs.size(), ctx.threads, [&](std::size_t trial) {
        Rng rng(substream(ctx.seed, {0x2A4Du, trial}));
        const SelectionMatrix genome =
            SelectionMatrix::random_with_popcount(ctx.model.node_count(), q, rng);
        ForestParams fp = ctx.forest;
        fp.seed = substream(ctx.seed, {0x2A4Fu, trial});
        const ForestModel model = fit_forest(select_rows(ctx.truth, genome), fp);
        errs[trial] = rmse_rel(truth_targets, model.predict_table(ctx.truth));
    });
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errs.size() - 1);
    return {mean, std::sqrt(var)};
}

/// One transfer: oracle rows on the selected subset only, final forest
/// trained on them, evaluated against the full set at that frequency.
inline FrequencyResult run_transfer(const SelectionMatrix& genome, double freq_hz, double r_t,
                                    const TransferContext& ctx) {
    if (genome.popcount() == 0) throw std::invalid_argument("run_transfer: empty genome");
    if (!(freq_hz > 0)) throw std::invalid_argument("run_transfer: frequency must be positive");
    FrequencyResult result;
    result.freq_hz = freq_hz;
    result.r_t = r_t;
    result.q = genome.popcount();
    const double n_pairs = static_cast<double>(ctx.model.node_count()) *
                           static_cast<double>(ctx.model.node_count());
    result.reduction = n_pairs / static_cast<double>(result.q);

    // The subset rows equal fresh oracle evaluations bit for bit, so they are
    // taken from the already computed truth table instead of recomputing.
    const FrfTable subset = select_rows(ctx.truth, genome);
    ForestParams fp = ctx.forest;
    fp.seed = substream(ctx.seed, {0x7244u});
    const ForestModel model = fit_forest(subset, fp, ctx.threads);
    result.predictions = model.predict_table(ctx.truth, ctx.threads);

    const std::vector<double> truth_targets = ctx.truth.targets();
    const EvalResult eval = evaluate(truth_targets, result.predictions);
    result.rmse_actual = eval.rmse_rel;
    result.r_actual = eval.r;
    result.r_defined = !eval.constant_truth;
    result.rmse_estimate = estimate_error(ctx.ga_seed_err, freq_hz, ctx.seed_freq_hz);
    const auto [mean, sd] = compare_random(result.q, ctx);
    result.random_mean = mean;
    result.random_std = sd;
    return result;
}

struct Report {
    PipelineConfig config;
    int node_count = 0;
    BenchmarkResult benchmark;
    std::vector<GaRunSummary> ga_runs;
    std::vector<std::pair<int, int>> rt_q_violations;
    std::vector<FrequencyResult> results;  // r_t-major, frequency-minor
    std::map<double, std::vector<double>> truth_by_freq;
    double gain_all = 0.0;         // mean (random_mean - rmse_actual) / random_mean
    double gain_below_seed = 0.0;  // same, restricted to f_c <= f_s
    struct Timing {
        double total_seconds = 0.0;
        double seed_stage_seconds = 0.0;
        double transfer_seconds = 0.0;
        std::map<std::string, double> benchmark_seconds;
        int threads_used = 1;
    } timing;
};

/// Full run: seed stage, then every (r_t, target frequency) transfer with its
/// random baseline. Deterministic for a fixed master seed apart from timing.
inline Report run_pipeline(const PipelineConfig& cfg) {
    detail::validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    Report report;
    report.config = cfg;
    report.timing.threads_used = resolve_threads(cfg.threads);

    SeedStage stage = run_seed_stage(cfg);
    const auto t1 = std::chrono::steady_clock::now();
    report.node_count = stage.model.node_count();
    report.benchmark = stage.benchmark;
    for (const auto& row : stage.benchmark.rows)
        report.timing.benchmark_seconds[row.model] = row.seconds;
    report.rt_q_violations = stage.rt_q_violations;

    std::map<double, FrfTable> truth_tables;
    for (double f : cfg.target_freqs_hz)
        if (!truth_tables.count(f))
            truth_tables.emplace(f, dataset_at_frequency(stage.model, f, cfg.threads));
    for (const auto& [freq, table] : truth_tables)
        report.truth_by_freq.emplace(freq, table.targets());

    double gain_sum = 0.0, gain_low_sum = 0.0;
    std::size_t gain_count = 0, gain_low_count = 0;
    for (std::size_t t = 0; t < stage.ga_runs.size(); ++t) {
        const GaRunSummary& run = stage.ga_runs[t];
        for (std::size_t k = 0; k < cfg.target_freqs_hz.size(); ++k) {
            const double f_c = cfg.target_freqs_hz[k];
            TransferContext ctx{stage.model,
                                truth_tables.at(f_c),
                                cfg.seed_freq_hz,
                                run.best.r_err,
                                cfg.final_forest,
                                cfg.random_trials,
                                substream(cfg.master_seed, {0x7247u, t, k}),
                                cfg.threads};
            FrequencyResult res = run_transfer(run.best.genome, f_c, run.r_t, ctx);
            if (res.random_mean > 0) {
                const double gain = (res.random_mean - res.rmse_actual) / res.random_mean;
                gain_sum += gain;
                ++gain_count;
                if (f_c <= cfg.seed_freq_hz) {
                    gain_low_sum += gain;
                    ++gain_low_count;
                }
            }
            report.results.push_back(std::move(res));
        }
    }
    report.ga_runs = std::move(stage.ga_runs);
    report.gain_all = gain_count ? gain_sum / static_cast<double>(gain_count) : 0.0;
    report.gain_below_seed =
        gain_low_count ? gain_low_sum / static_cast<double>(gain_low_count) : 0.0;

    const auto t2 = std::chrono::steady_clock::now();
    report.timing.seed_stage_seconds = std::chrono::duration<double>(t1 - t0).count();
    report.timing.transfer_seconds = std::chrono::duration<double>(t2 - t1).count();
    report.timing.total_seconds = std::chrono::duration<double>(t2 - t0).count();
    return report;
}

}  // namespace frfs
