// frfs command-line front end: synthetic FRF datasets, model benchmarks, GA
// subset selection, frequency transfer, and the full pipeline.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "frfs/config.hpp"
#include "frfs/report_io.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "Path to a key = value config file");
    cmd->add_option("--seed", opts.seed, "Master seed override (governs all randomness)");
    cmd->add_option("--threads", opts.threads,
                    "Worker thread cap; 0 = hardware, results are identical for any value");
}

frfs::PipelineConfig load_config(const CommonOptions& opts) {
    frfs::PipelineConfig cfg = opts.config_path.empty()
                                   ? frfs::default_pipeline_config()
                                   : frfs::load_pipeline_config(opts.config_path);
    if (opts.seed) cfg.master_seed = *opts.seed;
    if (opts.threads) cfg.threads = *opts.threads;
    if (opts.out) cfg.output_dir = *opts.out;
    return cfg;
}

frfs::StructureModel build_model(const frfs::PipelineConfig& cfg) {
    frfs::OracleConfig oracle = cfg.oracle;
    oracle.seed = frfs::substream(cfg.master_seed, {0x02ACu});
    return frfs::build_structure(oracle);
}

int run_dataset(const CommonOptions& opts, double freq) {
    const frfs::PipelineConfig cfg = load_config(opts);
    const frfs::StructureModel model = build_model(cfg);
    const double f = freq > 0 ? freq : cfg.seed_freq_hz;
    const frfs::FrfTable table = frfs::dataset_at_frequency(model, f, cfg.threads);
    frfs::persist(table, *opts.out);
    std::cout << "wrote " << table.rows.size() << " rows (" << model.node_count()
              << " nodes) at " << f << " Hz to " << *opts.out << "\n";
    return 0;
}

int run_benchmark_cmd(const CommonOptions& opts, double freq) {
    const frfs::PipelineConfig cfg = load_config(opts);
    const frfs::StructureModel model = build_model(cfg);
    const double f = freq > 0 ? freq : cfg.seed_freq_hz;
    const frfs::FrfTable table = frfs::dataset_at_frequency(model, f, cfg.threads);
    const frfs::BenchmarkResult result = frfs::run_benchmark(
        table, frfs::substream(cfg.master_seed, {0xBE7Cu}), cfg.benchmark, cfg.threads);

    std::printf("%-16s %10s %12s %10s\n", "model", "R", "RMSE-r", "time_s");
    for (const auto& row : result.rows) {
        if (row.eval.constant_truth)
            std::printf("%-16s %10s %12.5g %10.3f\n", row.model.c_str(), "undefined",
                        row.eval.rmse_rel, row.seconds);
        else
            std::printf("%-16s %10.6f %12.5g %10.3f\n", row.model.c_str(), row.eval.r,
                        row.eval.rmse_rel, row.seconds);
    }
    std::printf("extra_trees importances:");
    for (int f_idx = 0; f_idx < frfs::kFeatureCount; ++f_idx)
        std::printf(" %s=%.4f", frfs::kFeatureNames[static_cast<std::size_t>(f_idx)],
                    result.extra_trees_importance.weights[static_cast<std::size_t>(f_idx)]);
    std::printf("\n");

    if (opts.out) {
        frfs::json j;
        j["benchmark"] = frfs::json::array();
        for (const auto& row : result.rows)
            j["benchmark"].push_back(
                {{"model", row.model},
                 {"r", row.eval.constant_truth ? frfs::json(nullptr) : frfs::json(row.eval.r)},
                 {"rmse_rel", row.eval.rmse_rel},
                 {"seconds", row.seconds}});
        for (int f_idx = 0; f_idx < frfs::kFeatureCount; ++f_idx)
            j["extra_trees_importance"][frfs::kFeatureNames[static_cast<std::size_t>(f_idx)]] =
                result.extra_trees_importance.weights[static_cast<std::size_t>(f_idx)];
        std::ofstream out(*opts.out);
        if (!out) throw std::runtime_error("cannot open " + *opts.out);
        out << j.dump(2) << '\n';
    }
    return 0;
}

int run_ga_cmd(const CommonOptions& opts, double r_t) {
    frfs::PipelineConfig cfg = load_config(opts);
    const frfs::StructureModel model = build_model(cfg);
    const frfs::FrfTable table = frfs::dataset_at_frequency(model, cfg.seed_freq_hz, cfg.threads);
    const frfs::FrfTable holdout = frfs::make_holdout(
        table, cfg.ga.holdout_size, frfs::substream(cfg.master_seed, {0x401Du}));
    frfs::GaParams ga = cfg.ga;
    ga.tolerance = r_t;
    ga.seed = frfs::substream(cfg.master_seed, {0x6A0u, 0});
    const frfs::GaOutcome outcome = frfs::evolve(table, holdout, ga, cfg.threads);

    std::filesystem::create_directories(cfg.output_dir);
    frfs::save_genome(outcome.best.genome, r_t, cfg.seed_freq_hz, cfg.output_dir + "/genome.txt");
    frfs::save_history(outcome.history, cfg.output_dir + "/history.csv");
    const double n_pairs = static_cast<double>(model.node_count()) * model.node_count();
    std::printf("r_t=%g  q=%zu  r_err=%g  reduction=%.3f\n", r_t, outcome.best.q(),
                outcome.best.r_err,
                outcome.best.q() ? n_pairs / static_cast<double>(outcome.best.q()) : 0.0);
    std::printf("wrote %s/genome.txt and %s/history.csv\n", cfg.output_dir.c_str(),
                cfg.output_dir.c_str());
    return 0;
}

int run_transfer_cmd(const CommonOptions& opts, const std::string& genome_path, double freq,
                     std::optional<int> trials) {
    frfs::PipelineConfig cfg = load_config(opts);
    if (trials) cfg.random_trials = *trials;
    const frfs::StructureModel model = build_model(cfg);
    const frfs::GenomeFile genome_file = frfs::load_genome(genome_path);
    if (genome_file.genome.n() != model.node_count())
        throw std::runtime_error("genome node count " + std::to_string(genome_file.genome.n()) +
                                 " does not match the configured structure (" +
                                 std::to_string(model.node_count()) + " nodes)");

    // The seed-frequency error of the subset model, needed for the Eq-3 style
    // estimate, is measured on the fly from the genome.
    const double f_s = genome_file.seed_freq_hz > 0 ? genome_file.seed_freq_hz : cfg.seed_freq_hz;
    const frfs::FrfTable seed_truth = frfs::dataset_at_frequency(model, f_s, cfg.threads);
    frfs::ForestParams seed_fp = cfg.final_forest;
    seed_fp.seed = frfs::substream(cfg.master_seed, {0x5EEDECu});
    const frfs::ForestModel seed_model =
        frfs::fit_forest(frfs::select_rows(seed_truth, genome_file.genome), seed_fp, cfg.threads);
    const double seed_err =
        frfs::rmse_rel(seed_truth.targets(), seed_model.predict_table(seed_truth, cfg.threads));

    const frfs::FrfTable truth = frfs::dataset_at_frequency(model, freq, cfg.threads);
    frfs::TransferContext ctx{model,
                              truth,
                              f_s,
                              seed_err,
                              cfg.final_forest,
                              cfg.random_trials,
                              frfs::substream(cfg.master_seed, {0x7247u, 0, 0}),
                              cfg.threads};
    const frfs::FrequencyResult res =
        frfs::run_transfer(genome_file.genome, freq, genome_file.r_t, ctx);
    std::printf("f_c=%g Hz  q=%zu  reduction=%.3f\n", res.freq_hz, res.q, res.reduction);
    std::printf("rmse_actual=%g  rmse_estimate=%g  R=%s\n", res.rmse_actual, res.rmse_estimate,
                res.r_defined ? std::to_string(res.r_actual).c_str() : "undefined");
    std::printf("random baseline (same q, %d trials): mean=%g stddev=%g\n", cfg.random_trials,
                res.random_mean, res.random_std);
    return 0;
}

int run_pipeline_cmd(const CommonOptions& opts, std::optional<int> trials) {
    frfs::PipelineConfig cfg = load_config(opts);
    if (trials) cfg.random_trials = *trials;
    const frfs::Report report = frfs::run_pipeline(cfg);
    frfs::write_outputs(report, cfg.output_dir);
    std::cout << frfs::report_to_text(frfs::report_to_json(report));
    std::cout << "outputs written to " << cfg.output_dir << "\n";
    return 0;
}

int run_report_cmd(const std::string& report_path) {
    std::ifstream in(report_path);
    if (!in) throw std::runtime_error("cannot open " + report_path);
    frfs::json j;
    in >> j;
    std::cout << frfs::report_to_text(j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Green's-function surrogate pipeline: synthetic modal FRF oracle, "
                 "ExtraTrees regression, GA subset selection"};
    app.require_subcommand(1);

    CommonOptions dataset_opts, bench_opts, ga_opts, transfer_opts, run_opts;
    double dataset_freq = 0.0, bench_freq = 0.0, ga_rt = 0.0, transfer_freq = 0.0;
    std::string genome_path, report_path;
    std::optional<int> transfer_trials, run_trials;

    CLI::App* dataset = app.add_subcommand("dataset", "Compute the full 9N^2 FRF table at one frequency");
    add_common(dataset, dataset_opts);
    dataset->add_option("--freq", dataset_freq, "Frequency in Hz (default: seed frequency)");
    dataset->add_option("--out", dataset_opts.out, "Output CSV path")->required();

    CLI::App* bench = app.add_subcommand("benchmark", "Half-split comparison of the regression models");
    add_common(bench, bench_opts);
    bench->add_option("--freq", bench_freq, "Frequency in Hz (default: seed frequency)");
    bench->add_option("--out", bench_opts.out, "Optional JSON output path");

    CLI::App* ga = app.add_subcommand("ga", "Seed-frequency GA subset selection for one r_t");
    add_common(ga, ga_opts);
    ga->add_option("--rt", ga_rt, "RMSE-r tolerance r_t for the fitness gate")->required();
    ga->add_option("--out", ga_opts.out, "Output directory (default: config output_dir)");

    CLI::App* transfer = app.add_subcommand("transfer", "Apply a saved genome at another frequency");
    add_common(transfer, transfer_opts);
    transfer->add_option("--genome", genome_path, "Genome file from the ga/run subcommands")->required();
    transfer->add_option("--freq", transfer_freq, "Transfer frequency in Hz")->required();
    transfer->add_option("--trials", transfer_trials, "Random-baseline trial count");

    CLI::App* run = app.add_subcommand("run", "Full pipeline: seed stage, GA per r_t, all transfers");
    add_common(run, run_opts);
    run->add_option("--out", run_opts.out, "Output directory (default: config output_dir)");
    run->add_option("--trials", run_trials, "Random-baseline trial count");

    CLI::App* report = app.add_subcommand("report", "Render a report.json as human-readable text");
    report->add_option("report_json", report_path, "Path to report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    }

    try {
        if (dataset->parsed()) return run_dataset(dataset_opts, dataset_freq);
        if (bench->parsed()) return run_benchmark_cmd(bench_opts, bench_freq);
        if (ga->parsed()) return run_ga_cmd(ga_opts, ga_rt);
        if (transfer->parsed())
            return run_transfer_cmd(transfer_opts, genome_path, transfer_freq, transfer_trials);
        if (run->parsed()) return run_pipeline_cmd(run_opts, run_trials);
        if (report->parsed()) return run_report_cmd(report_path);
        std::cerr << app.help();
        return 1;
    } catch (const frfs::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
