#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frfs/pipeline.hpp"

namespace frfs {

/// Config problems are usage errors (exit code 1), not runtime failures.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}
}  // namespace detail

/// Flat `key = value` file with `#` comments.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: line " + std::to_string(line_no) + ": empty key");
        if (values.count(key))
            throw ConfigError("config: duplicate key '" + key + "'");
        values[key] = value;
    }
    return values;
}

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(std::map<std::string, std::string> values)
        : values_(std::move(values)) {}

    int get_int(const std::string& key, int fallback) {
        return static_cast<int>(get_ll(key, fallback));
    }

    long long get_ll(const std::string& key, long long fallback) {
        const auto* raw = lookup(key);
        if (!raw) return fallback;
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(*raw, &pos);
            if (pos != raw->size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "': not an integer: '" + *raw + "'");
        }
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        const auto* raw = lookup(key);
        if (!raw) return fallback;
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(*raw, &pos);
            if (pos != raw->size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "': not an unsigned integer: '" + *raw + "'");
        }
    }

    double get_double(const std::string& key, double fallback) {
        const auto* raw = lookup(key);
        if (!raw) return fallback;
        return parse_double(key, *raw);
    }

    bool get_bool(const std::string& key, bool fallback) {
        const auto* raw = lookup(key);
        if (!raw) return fallback;
        if (*raw == "true" || *raw == "1") return true;
        if (*raw == "false" || *raw == "0") return false;
        throw ConfigError("config: key '" + key + "': expected true/false: '" + *raw + "'");
    }

    std::string get_string(const std::string& key, std::string fallback) {
        const auto* raw = lookup(key);
        return raw ? *raw : fallback;
    }

    std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) {
        const auto* raw = lookup(key);
        if (!raw) return fallback;
        std::vector<double> out;
        std::istringstream ss(*raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty())
                throw ConfigError("config: key '" + key + "': empty list element");
            out.push_back(parse_double(key, item));
        }
        if (out.empty()) throw ConfigError("config: key '" + key + "': empty list");
        return out;
    }

    /// Every key must have been consumed by a getter; anything left over is
    /// rejected rather than silently ignored.
    void finish() const {
        for (const auto& [key, value] : values_)
            if (!consumed_.count(key))
                throw ConfigError("config: unknown key '" + key + "'");
    }

private:
    double parse_double(const std::string& key, const std::string& raw) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "': not a number: '" + raw + "'");
        }
    }

    const std::string* lookup(const std::string& key) {
        consumed_.insert(key);
        const auto it = values_.find(key);
        return it == values_.end() ? nullptr : &it->second;
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
};

}  // namespace detail

/// Applies a parsed config on top of the built-in defaults. Unknown keys are
/// an error.
inline PipelineConfig pipeline_config_from_map(std::map<std::string, std::string> values) {
    detail::ConfigReader reader(std::move(values));
    PipelineConfig cfg;

    cfg.oracle.grid_nx = reader.get_int("oracle.grid_nx", cfg.oracle.grid_nx);
    cfg.oracle.grid_ny = reader.get_int("oracle.grid_ny", cfg.oracle.grid_ny);
    cfg.oracle.grid_nz = reader.get_int("oracle.grid_nz", cfg.oracle.grid_nz);
    cfg.oracle.length_x = reader.get_double("oracle.length_x", cfg.oracle.length_x);
    cfg.oracle.length_y = reader.get_double("oracle.length_y", cfg.oracle.length_y);
    cfg.oracle.length_z = reader.get_double("oracle.length_z", cfg.oracle.length_z);
    cfg.oracle.mode_count = reader.get_int("oracle.mode_count", cfg.oracle.mode_count);
    cfg.oracle.damping_ratio = reader.get_double("oracle.damping_ratio", cfg.oracle.damping_ratio);
    const std::string spatial = reader.get_string("oracle.spatial_order", "ladder");
    if (spatial == "ladder") cfg.oracle.spatial_order = SpatialOrder::kLadder;
    else if (spatial == "uniform") cfg.oracle.spatial_order = SpatialOrder::kUniform;
    else throw ConfigError("config: key 'oracle.spatial_order': expected ladder|uniform");
    cfg.oracle.direction_anisotropy =
        reader.get_double("oracle.direction_anisotropy", cfg.oracle.direction_anisotropy);
    cfg.oracle.wave_mix = reader.get_double("oracle.wave_mix", cfg.oracle.wave_mix);

    cfg.seed_freq_hz = reader.get_double("pipeline.seed_freq_hz", cfg.seed_freq_hz);
    cfg.target_freqs_hz = reader.get_double_list("pipeline.target_freqs_hz", cfg.target_freqs_hz);
    cfg.tolerance_list = reader.get_double_list("pipeline.rt_list", cfg.tolerance_list);
    cfg.random_trials = reader.get_int("pipeline.random_trials", cfg.random_trials);

    cfg.ga.population = reader.get_int("ga.population", cfg.ga.population);
    cfg.ga.generations = reader.get_int("ga.generations", cfg.ga.generations);
    cfg.ga.remain_ratio = reader.get_double("ga.remain_ratio", cfg.ga.remain_ratio);
    cfg.ga.random_ratio = reader.get_double("ga.random_ratio", cfg.ga.random_ratio);
    cfg.ga.mutation_rate = reader.get_double("ga.mutation_rate", cfg.ga.mutation_rate);
    const std::string mut = reader.get_string("ga.mutation_mode", "scaled");
    if (mut == "scaled") cfg.ga.mutation_mode = MutationMode::kScaledPerBit;
    else if (mut == "raw") cfg.ga.mutation_mode = MutationMode::kRawPerBit;
    else throw ConfigError("config: key 'ga.mutation_mode': expected scaled|raw");
    cfg.ga.init_density = reader.get_double("ga.init_density", cfg.ga.init_density);
    cfg.ga.holdout_size = static_cast<std::size_t>(
        reader.get_ll("ga.holdout_size", static_cast<long long>(cfg.ga.holdout_size)));
    const int fitness_trees = reader.get_int("ga.fitness_trees", cfg.ga.fitness_forest.tree_count);

    cfg.final_forest.tree_count = reader.get_int("forest.trees", cfg.final_forest.tree_count);
    cfg.final_forest.mtry = reader.get_int("forest.mtry", cfg.final_forest.mtry);
    cfg.final_forest.min_node_size =
        reader.get_int("forest.min_node_size", cfg.final_forest.min_node_size);
    cfg.final_forest.bootstrap = reader.get_bool("forest.bootstrap", cfg.final_forest.bootstrap);
    const std::string split = reader.get_string("forest.split_mode", "extra_random");
    try {
        cfg.final_forest.split_mode = split_mode_from_name(split);
    } catch (const std::exception&) {
        throw ConfigError("config: key 'forest.split_mode': expected extra_random|best_exhaustive");
    }

    // The fitness forest shares the final-forest shape with a reduced tree
    // count for speed.
    cfg.ga.fitness_forest = cfg.final_forest;
    cfg.ga.fitness_forest.tree_count = fitness_trees;

    cfg.benchmark.knn_k = reader.get_int("benchmark.knn_k", cfg.benchmark.knn_k);
    cfg.benchmark.forest = cfg.final_forest;

    cfg.master_seed = reader.get_u64("seed", cfg.master_seed);
    cfg.threads = reader.get_int("threads", cfg.threads);
    cfg.output_dir = reader.get_string("output_dir", cfg.output_dir);

    reader.finish();
    return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    return pipeline_config_from_map(parse_config_file(path));
}

inline PipelineConfig default_pipeline_config() { return pipeline_config_from_map({}); }

}  // namespace frfs
