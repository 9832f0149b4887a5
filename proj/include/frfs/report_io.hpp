#pragma once

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "frfs/pipeline.hpp"

namespace frfs {

using json = nlohmann::json;

namespace detail {
inline json to_json(const OracleConfig& o) {
    return {{"grid_nx", o.grid_nx},
            {"grid_ny", o.grid_ny},
            {"grid_nz", o.grid_nz},
            {"length_x", o.length_x},
            {"length_y", o.length_y},
            {"length_z", o.length_z},
            {"mode_count", o.mode_count},
            {"damping_ratio", o.damping_ratio},
            {"spatial_order", o.spatial_order == SpatialOrder::kLadder ? "ladder" : "uniform"},
            {"direction_anisotropy", o.direction_anisotropy},
            {"wave_mix", o.wave_mix}};
}

inline json to_json(const ForestParams& p) {
    return {{"trees", p.tree_count},
            {"mtry", p.mtry},
            {"min_node_size", p.min_node_size},
            {"bootstrap", p.bootstrap},
            {"split_mode", split_mode_name(p.split_mode)}};
}

inline json to_json(const GaParams& g) {
    return {{"population", g.population},
            {"generations", g.generations},
            {"remain_ratio", g.remain_ratio},
            {"random_ratio", g.random_ratio},
            {"mutation_rate", g.mutation_rate},
            {"mutation_mode", g.mutation_mode == MutationMode::kScaledPerBit ? "scaled" : "raw"},
            {"init_density", g.init_density},
            {"holdout_size", g.holdout_size},
            {"fitness_trees", g.fitness_forest.tree_count}};
}

inline json config_echo(const PipelineConfig& cfg) {
    // threads and output_dir are execution details, echoed under "execution"
    // instead so reports from different thread counts compare equal.
    return {{"oracle", to_json(cfg.oracle)},
            {"seed_freq_hz", cfg.seed_freq_hz},
            {"target_freqs_hz", cfg.target_freqs_hz},
            {"rt_list", cfg.tolerance_list},
            {"ga", to_json(cfg.ga)},
            {"final_forest", to_json(cfg.final_forest)},
            {"knn_k", cfg.benchmark.knn_k},
            {"random_trials", cfg.random_trials},
            {"master_seed", cfg.master_seed}};
}

inline json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}
}  // namespace detail

inline json report_to_json(const Report& report) {
    json j;
    j["schema"] = "frfs-report v1";
    j["config"] = detail::config_echo(report.config);
    j["node_count"] = report.node_count;

    json bench = json::array();
    for (const auto& row : report.benchmark.rows) {
        bench.push_back({{"model", row.model},
                         {"r", row.eval.constant_truth ? json(nullptr) : json(row.eval.r)},
                         {"rmse_rel", row.eval.rmse_rel},
                         {"n", row.eval.n}});
    }
    j["benchmark"] = bench;

    const FeatureImportance imp = report.benchmark.extra_trees_importance;
    json imp_json;
    for (int f = 0; f < kFeatureCount; ++f)
        imp_json[kFeatureNames[static_cast<std::size_t>(f)]] = imp.weights[static_cast<std::size_t>(f)];
    j["extra_trees_importance"] = imp_json;
    j["extra_trees_importance_no_splits"] = imp.no_splits;

    json ga = json::array();
    for (const auto& run : report.ga_runs) {
        json hist = json::array();
        for (const auto& e : run.history.entries)
            hist.push_back({{"generation", e.generation},
                            {"best_f", detail::finite_or_null(e.best_fitness)},
                            {"best_q", e.best_q},
                            {"best_r", detail::finite_or_null(e.best_r_err)}});
        ga.push_back({{"r_t", run.r_t},
                      {"q", run.best.q()},
                      {"r_err", detail::finite_or_null(run.best.r_err)},
                      {"fitness", detail::finite_or_null(run.best.fitness)},
                      {"reduction", run.reduction},
                      {"history", hist}});
    }
    j["ga"] = ga;

    json violations = json::array();
    for (const auto& [a, b] : report.rt_q_violations) violations.push_back({a, b});
    j["rt_q_violations"] = violations;

    json results = json::array();
    for (const auto& r : report.results) {
        results.push_back({{"freq_hz", r.freq_hz},
                           {"r_t", r.r_t},
                           {"q", r.q},
                           {"reduction", r.reduction},
                           {"rmse_actual", r.rmse_actual},
                           {"r_actual", r.r_defined ? json(r.r_actual) : json(nullptr)},
                           {"rmse_estimate", r.rmse_estimate},
                           {"random_mean", r.random_mean},
                           {"random_std", r.random_std}});
    }
    j["results"] = results;
    j["gain_all"] = report.gain_all;
    j["gain_below_seed"] = report.gain_below_seed;

    json bench_seconds;
    for (const auto& [model, secs] : report.timing.benchmark_seconds) bench_seconds[model] = secs;
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%FT%TZ", &tm_utc);
    j["execution"] = {{"threads", report.timing.threads_used},
                      {"output_dir", report.config.output_dir},
                      {"timestamp", stamp},
                      {"total_seconds", report.timing.total_seconds},
                      {"seed_stage_seconds", report.timing.seed_stage_seconds},
                      {"transfer_seconds", report.timing.transfer_seconds},
                      {"benchmark_seconds", bench_seconds}};
    return j;
}

/// Removes the execution metadata (threads, timings, timestamp, paths); what
/// remains is fully determined by the config and master seed.
inline json strip_execution(json j) {
    j.erase("execution");
    return j;
}

/// Human-readable rendering of a report JSON document.
inline std::string report_to_text(const json& j) {
    std::ostringstream out;
    const auto line = [&](int width) { out << std::string(static_cast<std::size_t>(width), '-') << '\n'; };
    out << "Report (" << j.value("schema", "?") << ")\n";
    out << "nodes: " << j["node_count"].get<int>()
        << "  seed frequency: " << j["config"]["seed_freq_hz"].get<double>() << " Hz"
        << "  master seed: " << j["config"]["master_seed"].get<std::uint64_t>() << "\n\n";

    out << "Model benchmark (half split at seed frequency)\n";
    line(56);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-16s %10s %12s\n", "model", "R", "RMSE-r");
    out << buf;
    for (const auto& row : j["benchmark"]) {
        const std::string r_text = row["r"].is_null() ? "undefined" : [&] {
            char t[32];
            std::snprintf(t, sizeof(t), "%.6f", row["r"].get<double>());
            return std::string(t);
        }();
        std::snprintf(buf, sizeof(buf), "%-16s %10s %12.5g\n",
                      row["model"].get<std::string>().c_str(), r_text.c_str(),
                      row["rmse_rel"].get<double>());
        out << buf;
    }
    out << "\nExtraTrees feature importances\n";
    line(56);
    for (const auto& [name, value] : j["extra_trees_importance"].items()) {
        std::snprintf(buf, sizeof(buf), "%-12s %8.4f\n", name.c_str(), value.get<double>());
        out << buf;
    }

    out << "\nGA subset selection (per r_t)\n";
    line(56);
    std::snprintf(buf, sizeof(buf), "%8s %8s %10s %10s\n", "r_t", "q", "r_err", "reduction");
    out << buf;
    for (const auto& run : j["ga"]) {
        std::snprintf(buf, sizeof(buf), "%8.4g %8zu %10.4g %10.3f\n", run["r_t"].get<double>(),
                      run["q"].get<std::size_t>(),
                      run["r_err"].is_null() ? std::numeric_limits<double>::quiet_NaN()
                                             : run["r_err"].get<double>(),
                      run["reduction"].get<double>());
        out << buf;
    }

    out << "\nTransfers (actual vs estimated vs random baseline)\n";
    line(78);
    std::snprintf(buf, sizeof(buf), "%8s %8s %8s %10s %10s %10s %10s\n", "r_t", "f_c", "q",
                  "actual", "estimate", "rand_mean", "rand_std");
    out << buf;
    for (const auto& r : j["results"]) {
        std::snprintf(buf, sizeof(buf), "%8.4g %8.4g %8zu %10.4g %10.4g %10.4g %10.4g\n",
                      r["r_t"].get<double>(), r["freq_hz"].get<double>(), r["q"].get<std::size_t>(),
                      r["rmse_actual"].get<double>(), r["rmse_estimate"].get<double>(),
                      r["random_mean"].get<double>(), r["random_std"].get<double>());
        out << buf;
    }
    out << "\nGA vs random gain: all cells " << j["gain_all"].get<double>()
        << ", f_c <= f_s only " << j["gain_below_seed"].get<double>() << "\n";
    if (j.contains("execution") && j["execution"].contains("total_seconds"))
        out << "total wall time: " << j["execution"]["total_seconds"].get<double>() << " s\n";
    return out.str();
}

/// Writes report.json, the per-r_t genome and history files, and one
/// truth/prediction CSV per (r_t, frequency) cell.
inline void write_outputs(const Report& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(dir + "/report.json");
        if (!out) throw std::runtime_error("write_outputs: cannot open report.json");
        out << report_to_json(report).dump(2) << '\n';
    }
    for (std::size_t t = 0; t < report.ga_runs.size(); ++t) {
        const auto& run = report.ga_runs[t];
        save_genome(run.best.genome, run.r_t, report.config.seed_freq_hz,
                    dir + "/ga_rt" + std::to_string(t) + ".genome");
        save_history(run.history, dir + "/ga_rt" + std::to_string(t) + "_history.csv");
    }
    std::size_t result_idx = 0;
    for (std::size_t t = 0; t < report.ga_runs.size(); ++t) {
        for (std::size_t k = 0; k < report.config.target_freqs_hz.size(); ++k, ++result_idx) {
            const FrequencyResult& r = report.results[result_idx];
            const auto& truth = report.truth_by_freq.at(r.freq_hz);
            char freq_text[32];
            std::snprintf(freq_text, sizeof(freq_text), "%g", r.freq_hz);
            std::ofstream out(dir + "/predictions_rt" + std::to_string(t) + "_fc" + freq_text +
                              ".csv");
            if (!out) throw std::runtime_error("write_outputs: cannot open predictions csv");
            out << "truth_db,prediction_db\n";
            for (std::size_t row = 0; row < truth.size(); ++row)
                out << detail::format_full(truth[row]) << ','
                    << detail::format_full(r.predictions[row]) << '\n';
        }
    }
}

}  // namespace frfs
