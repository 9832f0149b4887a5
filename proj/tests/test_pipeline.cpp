#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "frfs/config.hpp"
#include "frfs/pipeline.hpp"
#include "frfs/report_io.hpp"

using namespace frfs;
using Catch::Approx;

namespace {

PipelineConfig tiny_config() {
    PipelineConfig cfg;
    cfg.oracle.grid_nx = 3;
    cfg.oracle.grid_ny = 3;
    cfg.oracle.grid_nz = 2;
    cfg.oracle.mode_count = 8;
    cfg.target_freqs_hz = {80.0, 120.0};
    cfg.tolerance_list = {0.12, 0.08};
    cfg.random_trials = 3;
    cfg.ga.population = 8;
    cfg.ga.generations = 4;
    cfg.ga.holdout_size = 600;
    cfg.ga.fitness_forest.tree_count = 5;
    cfg.final_forest.tree_count = 12;
    cfg.benchmark.forest.tree_count = 10;
    cfg.master_seed = 42;
    cfg.threads = 1;
    return cfg;
}

}  // namespace

TEST_CASE("estimate_error follows the frequency ratio", "[pipeline]") {
    REQUIRE(estimate_error(0.0138, 50.0, 100.0) == Approx(0.0069).epsilon(1e-15));
    REQUIRE(estimate_error(0.25, 100.0, 100.0) == 0.25);
    REQUIRE(estimate_error(0.1, 300.0, 100.0) == Approx(2.0 * estimate_error(0.1, 150.0, 100.0)));
    REQUIRE_THROWS_AS(estimate_error(0.1, 50.0, 0.0), std::invalid_argument);
}

TEST_CASE("seed stage returns one genome per tolerance", "[pipeline]") {
    const PipelineConfig cfg = tiny_config();
    const SeedStage stage = run_seed_stage(cfg);
    REQUIRE(stage.model.node_count() == 18);
    REQUIRE(stage.seed_table.rows.size() == full_row_count(18));
    REQUIRE(stage.ga_runs.size() == cfg.tolerance_list.size());
    REQUIRE(stage.benchmark.rows.size() == 4);
    for (std::size_t t = 0; t < stage.ga_runs.size(); ++t) {
        REQUIRE(stage.ga_runs[t].r_t == cfg.tolerance_list[t]);
        REQUIRE(stage.ga_runs[t].best.q() >= 1);
        REQUIRE(stage.ga_runs[t].reduction ==
                Approx(18.0 * 18.0 / static_cast<double>(stage.ga_runs[t].best.q())));
    }
}

TEST_CASE("full pipeline report is complete and self-consistent", "[pipeline]") {
    const PipelineConfig cfg = tiny_config();
    const Report report = run_pipeline(cfg);
    REQUIRE(report.results.size() == cfg.tolerance_list.size() * cfg.target_freqs_hz.size());
    std::size_t idx = 0;
    for (std::size_t t = 0; t < cfg.tolerance_list.size(); ++t)
        for (std::size_t k = 0; k < cfg.target_freqs_hz.size(); ++k, ++idx) {
            const FrequencyResult& r = report.results[idx];
            REQUIRE(r.r_t == cfg.tolerance_list[t]);
            REQUIRE(r.freq_hz == cfg.target_freqs_hz[k]);
            REQUIRE(r.q == report.ga_runs[t].best.q());
            REQUIRE(r.reduction >= 1.0);
            REQUIRE(r.reduction == Approx(18.0 * 18.0 / static_cast<double>(r.q)));
            REQUIRE(r.rmse_actual >= 0.0);
            REQUIRE(r.random_mean >= 0.0);
            REQUIRE(r.rmse_estimate ==
                    Approx(estimate_error(report.ga_runs[t].best.r_err, r.freq_hz,
                                          cfg.seed_freq_hz)));
            REQUIRE(r.predictions.size() == full_row_count(18));
        }
    for (const auto& [freq, truth] : report.truth_by_freq)
        REQUIRE(truth.size() == full_row_count(18));
}

TEST_CASE("pipeline is deterministic and thread-count independent", "[pipeline]") {
    PipelineConfig cfg = tiny_config();
    cfg.threads = 1;
    const json a = strip_execution(report_to_json(run_pipeline(cfg)));
    cfg.threads = 4;
    const json b = strip_execution(report_to_json(run_pipeline(cfg)));
    REQUIRE(a.dump() == b.dump());
}

TEST_CASE("self-transfer at the seed frequency stays near the GA error", "[pipeline]") {
    const PipelineConfig cfg = tiny_config();
    const SeedStage stage = run_seed_stage(cfg);
    const GaRunSummary& run = stage.ga_runs[0];
    TransferContext ctx{stage.model,   stage.seed_table,          cfg.seed_freq_hz,
                        run.best.r_err, cfg.final_forest,          cfg.random_trials,
                        substream(1, {2}), cfg.threads};
    const FrequencyResult res = run_transfer(run.best.genome, cfg.seed_freq_hz, run.r_t, ctx);
    REQUIRE(res.rmse_estimate == Approx(run.best.r_err));  // Eq-3 identity at f_c = f_s
    REQUIRE(res.rmse_actual <= 1.5 * run.r_t);
}

TEST_CASE("compare_random validates trials and empty genomes are rejected", "[pipeline]") {
    const PipelineConfig cfg = tiny_config();
    const SeedStage stage = run_seed_stage(cfg);
    TransferContext ctx{stage.model,   stage.seed_table, cfg.seed_freq_hz, 0.05,
                        cfg.final_forest, 2,             7,                1};
    REQUIRE_THROWS_AS(compare_random(5, ctx), std::invalid_argument);
    ctx.trials = 3;
    const auto [mean, sd] = compare_random(5, ctx);
    REQUIRE(mean > 0.0);
    REQUIRE(sd >= 0.0);
    REQUIRE_THROWS_AS(run_transfer(SelectionMatrix(18), 100.0, 0.1, ctx),
                      std::invalid_argument);
}

TEST_CASE("report JSON carries the advertised sections", "[pipeline]") {
    const PipelineConfig cfg = tiny_config();
    const Report report = run_pipeline(cfg);
    const json j = report_to_json(report);
    for (const char* key : {"schema", "config", "node_count", "benchmark",
                            "extra_trees_importance", "ga", "results", "gain_all",
                            "gain_below_seed", "execution", "rt_q_violations"})
        REQUIRE(j.contains(key));
    REQUIRE(j["schema"] == "frfs-report v1");
    REQUIRE(j["ga"].size() == cfg.tolerance_list.size());
    REQUIRE_FALSE(j["config"].contains("threads"));      // execution detail
    REQUIRE_FALSE(j["config"].contains("output_dir"));   // execution detail
    REQUIRE(j["execution"].contains("threads"));
    const json stripped = strip_execution(j);
    REQUIRE_FALSE(stripped.contains("execution"));
    // the text renderer accepts both full and stripped documents
    REQUIRE_FALSE(report_to_text(j).empty());
    REQUIRE_FALSE(report_to_text(stripped).empty());
}

TEST_CASE("write_outputs produces the report, genomes, histories, and CSVs", "[pipeline]") {
    const PipelineConfig cfg = tiny_config();
    const Report report = run_pipeline(cfg);
    const std::string dir =
        (std::filesystem::temp_directory_path() /
         ("frfs_outputs_" + std::to_string(::getpid())))
            .string();
    write_outputs(report, dir);
    REQUIRE(std::filesystem::exists(dir + "/report.json"));
    for (std::size_t t = 0; t < cfg.tolerance_list.size(); ++t) {
        REQUIRE(std::filesystem::exists(dir + "/ga_rt" + std::to_string(t) + ".genome"));
        REQUIRE(std::filesystem::exists(dir + "/ga_rt" + std::to_string(t) + "_history.csv"));
        const GenomeFile genome = load_genome(dir + "/ga_rt" + std::to_string(t) + ".genome");
        REQUIRE(genome.genome == report.ga_runs[t].best.genome);
        for (double f : cfg.target_freqs_hz) {
            char freq_text[32];
            std::snprintf(freq_text, sizeof(freq_text), "%g", f);
            REQUIRE(std::filesystem::exists(dir + "/predictions_rt" + std::to_string(t) +
                                            "_fc" + freq_text + ".csv"));
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("pipeline validates config values", "[pipeline]") {
    PipelineConfig cfg = tiny_config();
    cfg.seed_freq_hz = 0.0;
    REQUIRE_THROWS_AS(run_pipeline(cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.tolerance_list = {0.1, -0.5};
    REQUIRE_THROWS_AS(run_pipeline(cfg), std::invalid_argument);
    cfg = tiny_config();
    cfg.target_freqs_hz.clear();
    REQUIRE_THROWS_AS(run_pipeline(cfg), std::invalid_argument);
}

TEST_CASE("config parser applies defaults, overrides, and rejects unknown keys", "[config]") {
    const PipelineConfig defaults = default_pipeline_config();
    REQUIRE(defaults.oracle.grid_nx == 8);
    REQUIRE(defaults.oracle.grid_ny == 5);
    REQUIRE(defaults.oracle.grid_nz == 2);
    REQUIRE(defaults.seed_freq_hz == 100.0);
    REQUIRE(defaults.target_freqs_hz == std::vector<double>{50, 70, 98, 102, 120, 150});
    REQUIRE(defaults.tolerance_list == std::vector<double>{0.8, 0.7, 0.5, 0.3});
    REQUIRE(defaults.ga.remain_ratio == 0.4);
    REQUIRE(defaults.ga.random_ratio == 0.1);
    REQUIRE(defaults.ga.mutation_rate == 0.02);
    REQUIRE(defaults.ga.population == 24);
    REQUIRE(defaults.ga.generations == 40);
    REQUIRE(defaults.final_forest.tree_count == 100);
    REQUIRE(defaults.final_forest.mtry == 8);
    REQUIRE(defaults.final_forest.min_node_size == 2);
    REQUIRE(defaults.final_forest.bootstrap);
    REQUIRE(defaults.random_trials == 10);

    const PipelineConfig parsed = pipeline_config_from_map({{"oracle.grid_nx", "4"},
                                                            {"pipeline.rt_list", "0.5,0.25"},
                                                            {"ga.mutation_mode", "raw"},
                                                            {"seed", "7"}});
    REQUIRE(parsed.oracle.grid_nx == 4);
    REQUIRE(parsed.tolerance_list == std::vector<double>{0.5, 0.25});
    REQUIRE(parsed.ga.mutation_mode == MutationMode::kRawPerBit);
    REQUIRE(parsed.master_seed == 7);

    REQUIRE_THROWS_WITH(pipeline_config_from_map({{"oracle.grid_sx", "4"}}),
                        Catch::Matchers::ContainsSubstring("oracle.grid_sx"));
    REQUIRE_THROWS_WITH(pipeline_config_from_map({{"ga.population", "abc"}}),
                        Catch::Matchers::ContainsSubstring("ga.population"));
    REQUIRE_THROWS_WITH(pipeline_config_from_map({{"forest.bootstrap", "maybe"}}),
                        Catch::Matchers::ContainsSubstring("forest.bootstrap"));
}
