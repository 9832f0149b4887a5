#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "frfs/dataset.hpp"
#include "frfs/metrics.hpp"
#include "frfs/parallel.hpp"
#include "frfs/rng.hpp"
#include "frfs/trees.hpp"

namespace frfs {

enum class MutationMode {
    kScaledPerBit,  // per-bit flip rate m / N, expected m*N flips per genome
    kRawPerBit,     // per-bit flip rate m, the paper's wording taken literally
};

struct GaParams {
    int population = 24;          // P
    int generations = 40;         // E evolution steps after the initial population
    double remain_ratio = 0.4;    // elite fraction kept unchanged
    double random_ratio = 0.1;    // extra survivors drawn at random
    double mutation_rate = 0.02;  // m
    MutationMode mutation_mode = MutationMode::kScaledPerBit;
    double tolerance = 0.3;       // r_t, feasibility gate on holdout RMSE-r
    double init_density = 0.5;    // rho_0
    std::size_t holdout_size = 5000;
    ForestParams fitness_forest{.tree_count = 20};
    std::uint64_t seed = 0;
};

struct Individual {
    SelectionMatrix genome;
    double r_err = std::numeric_limits<double>::infinity();
    double fitness = 0.0;
    std::uint64_t creation_index = 0;

    std::size_t q() const { return genome.popcount(); }
};

struct GaHistory {
    struct Entry {
        int generation = 0;
        double best_fitness = 0.0;
        std::size_t best_q = 0;
        double best_r_err = 0.0;
    };
    std::vector<Entry> entries;  // entry 0 is the evaluated initial population
};

namespace detail {
inline void validate(const GaParams& p) {
    if (p.population < 4) throw std::invalid_argument("GaParams: population must be >= 4");
    if (p.generations < 1) throw std::invalid_argument("GaParams: generations must be >= 1");
    if (!(p.remain_ratio + p.random_ratio < 1.0))
        throw std::invalid_argument("GaParams: remain_ratio + random_ratio must be < 1");
    if (p.mutation_rate < 0.0 || p.mutation_rate > 1.0)
        throw std::invalid_argument("GaParams: mutation rate must be in [0, 1]");
    if (!(p.init_density > 0.0) || p.init_density > 1.0)
        throw std::invalid_argument("GaParams: init density must be in (0, 1]");
    if (!(p.tolerance > 0.0)) throw std::invalid_argument("GaParams: tolerance must be > 0");
}

/// Fitness-descending order; among equal fitness (all infeasibles in
/// particular) lower holdout error first, then smaller subsets, then age.
inline bool better(const Individual& a, const Individual& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    if (a.r_err != b.r_err) return a.r_err < b.r_err;
    if (a.q() != b.q()) return a.q() < b.q();
    return a.creation_index < b.creation_index;
}
}  // namespace detail

/// P genomes with each bit set independently with probability init_density.
/// Fitness is left unevaluated.
inline std::vector<Individual> init_population(const GaParams& params, int node_count) {
    detail::validate(params);
    std::vector<Individual> population;
    population.reserve(static_cast<std::size_t>(params.population));
    for (int slot = 0; slot < params.population; ++slot) {
        Rng rng(substream(params.seed, {0x1417u, static_cast<std::uint64_t>(slot)}));
        Individual ind{SelectionMatrix::random_dense(node_count, params.init_density, rng)};
        ind.creation_index = static_cast<std::uint64_t>(slot);
        population.push_back(std::move(ind));
    }
    return population;
}

/// f = H[r_t - r] / (r * q) with H[0] = 1: infeasible individuals score
/// exactly zero, feasible ones are rewarded for small error and small q.
inline double fitness_from(double r_err, std::size_t q, double tolerance) {
    if (q == 0 || !(r_err <= tolerance)) return 0.0;
    return 1.0 / (r_err * static_cast<double>(q));
}

/// Trains the fitness forest on the selected rows of the seed table and
/// measures RMSE-r on the fixed holdout. Empty genomes are marked infeasible
/// without training.
inline void evaluate_fitness(Individual& ind, const FrfTable& seed_table,
                             const FrfTable& holdout, const GaParams& params,
                             std::uint64_t eval_seed) {
    if (holdout.rows.empty()) throw std::invalid_argument("evaluate_fitness: empty holdout");
    const std::size_t q = ind.q();
    if (q == 0) {
        ind.r_err = std::numeric_limits<double>::infinity();
        ind.fitness = 0.0;
        return;
    }
    ForestParams fp = params.fitness_forest;
    fp.seed = eval_seed;
    const ForestModel model = fit_forest(select_rows(seed_table, ind.genome), fp);
    const std::vector<double> pred = model.predict_table(holdout);
    const std::vector<double> truth = holdout.targets();
    ind.r_err = rmse_rel(truth, pred);
    ind.fitness = fitness_from(ind.r_err, q, params.tolerance);
}

/// AND crossover: the child selects a pair only where both parents do, so
/// child q never exceeds either parent's.
inline SelectionMatrix crossover_and(const Individual& a, const Individual& b) {
    return a.genome.and_with(b.genome);
}

/// Flips each bit independently. In kScaledPerBit mode the rate is m / N so
/// a genome sees m*N expected flips; kRawPerBit uses m directly.
inline void mutate(SelectionMatrix& genome, double mutation_rate, MutationMode mode, Rng& rng) {
    if (mutation_rate < 0.0 || mutation_rate > 1.0)
        throw std::invalid_argument("mutate: rate must be in [0, 1]");
    const int n = genome.n();
    const double per_bit =
        mode == MutationMode::kScaledPerBit ? mutation_rate / static_cast<double>(n) : mutation_rate;
    if (per_bit <= 0.0) return;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (rng.uniform01() < per_bit) genome.flip(i, j);
}

struct GaOutcome {
    Individual best;
    GaHistory history;
};

/// Full evolution loop: elitism, random survivors, AND crossover, mutation of
/// non-elites. Per-individual substreams make parallel fitness evaluation
/// match the sequential order exactly.
inline GaOutcome evolve(const FrfTable& seed_table, const FrfTable& holdout,
                        const GaParams& params, int threads = 1) {
    detail::validate(params);
    if (seed_table.rows.empty()) throw std::invalid_argument("evolve: empty seed table");

    const int population_size = params.population;
    const int n_elite = static_cast<int>(std::ceil(population_size * params.remain_ratio));
    const int n_random = static_cast<int>(std::ceil(population_size * params.random_ratio));
    const int n_child = population_size - n_elite - n_random;
    if (n_elite + n_random < 2)
        throw std::invalid_argument("evolve: fewer than 2 survivors available for crossover");
    if (n_child < 0)
        throw std::invalid_argument("evolve: remain/random ratios leave no room for children");

    std::vector<Individual> population = init_population(params, seed_table.node_count);
    std::uint64_t next_creation = static_cast<std::uint64_t>(population_size);
    parallel_for(population.size(), threads, [&](std::size_t slot) {
        evaluate_fitness(population[slot], seed_table, holdout, params,
                         substream(params.seed, {0xEBA1u, 0, slot}));
    });

    GaHistory history;
    Individual best_ever = *std::min_element(
        population.begin(), population.end(),
        [](const Individual& a, const Individual& b) { return detail::better(a, b); });
    const auto record = [&](int generation) {
        const Individual& gen_best = *std::min_element(
            population.begin(), population.end(),
            [](const Individual& a, const Individual& b) { return detail::better(a, b); });
        if (detail::better(gen_best, best_ever)) best_ever = gen_best;
        history.entries.push_back({generation, gen_best.fitness, gen_best.q(), gen_best.r_err});
    };
    record(0);

    for (int gen = 1; gen <= params.generations; ++gen) {
        std::sort(population.begin(), population.end(), detail::better);

        std::vector<Individual> next;
        next.reserve(static_cast<std::size_t>(population_size));
        for (int e = 0; e < n_elite; ++e) next.push_back(population[static_cast<std::size_t>(e)]);

        Rng gen_rng(substream(params.seed, {0x6E4u, static_cast<std::uint64_t>(gen)}));
        // Random survivors drawn without replacement from the non-elites.
        std::vector<int> non_elite(static_cast<std::size_t>(population_size - n_elite));
        std::iota(non_elite.begin(), non_elite.end(), n_elite);
        for (int r = 0; r < n_random; ++r) {
            const std::size_t pick =
                static_cast<std::size_t>(r) +
                static_cast<std::size_t>(gen_rng.below(non_elite.size() - static_cast<std::size_t>(r)));
            std::swap(non_elite[static_cast<std::size_t>(r)], non_elite[pick]);
            next.push_back(population[static_cast<std::size_t>(non_elite[static_cast<std::size_t>(r)])]);
        }

        const std::size_t survivor_count = next.size();
        for (int c = 0; c < n_child; ++c) {
            std::size_t pa = static_cast<std::size_t>(gen_rng.below(survivor_count));
            std::size_t pb = static_cast<std::size_t>(gen_rng.below(survivor_count - 1));
            if (pb >= pa) ++pb;
            Individual child{crossover_and(next[pa], next[pb])};
            child.creation_index = next_creation++;
            next.push_back(std::move(child));
        }

        // Elites are exempt from mutation; everyone else is re-evaluated.
        for (std::size_t slot = static_cast<std::size_t>(n_elite); slot < next.size(); ++slot) {
            Rng mut_rng(substream(params.seed,
                                  {0x3017u, static_cast<std::uint64_t>(gen), slot}));
            mutate(next[slot].genome, params.mutation_rate, params.mutation_mode, mut_rng);
        }
        parallel_for(next.size() - static_cast<std::size_t>(n_elite), threads, [&](std::size_t k) {
            const std::size_t slot = static_cast<std::size_t>(n_elite) + k;
            evaluate_fitness(next[slot], seed_table, holdout, params,
                             substream(params.seed,
                                       {0xEBA1u, static_cast<std::uint64_t>(gen), slot}));
        });

        population = std::move(next);
        record(gen);
    }
    return {best_ever, history};
}

/// Deterministic seeded holdout sample for fitness evaluation, reused across
/// every individual and generation so fitness values stay comparable.
inline FrfTable make_holdout(const FrfTable& seed_table, std::size_t holdout_size,
                             std::uint64_t seed) {
    if (seed_table.rows.empty()) throw std::invalid_argument("make_holdout: empty table");
    const std::size_t n = seed_table.rows.size();
    const std::size_t take = std::min(holdout_size, n);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0U);
    Rng rng(seed);
    for (std::size_t k = 0; k < take; ++k) {
        const std::size_t pick = k + static_cast<std::size_t>(rng.below(n - k));
        std::swap(order[k], order[pick]);
    }
    FrfTable holdout{seed_table.freq_hz, seed_table.node_count, {}};
    holdout.rows.reserve(take);
    for (std::size_t k = 0; k < take; ++k)
        holdout.rows.push_back(seed_table.rows[order[k]]);
    return holdout;
}

// --- genome and history files -----------------------------------------------

/// Bit-matrix file: text header plus row-major run-length-encoded bits.
inline void save_genome(const SelectionMatrix& genome, double r_t, double seed_freq_hz,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_genome: cannot open " + path);
    out << "frfs-genome v1\n";
    out << "n_nodes " << genome.n() << "\n";
    out << "q " << genome.popcount() << "\n";
    out << "r_t " << detail::format_full(r_t) << "\n";
    out << "seed_freq_hz " << detail::format_full(seed_freq_hz) << "\n";
    const int n = genome.n();
    bool current = genome.test(0, 0);
    std::uint64_t run = 0;
    out << "bits " << (current ? 1 : 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const bool bit = genome.test(i, j);
            if (bit == current) {
                ++run;
            } else {
                out << ' ' << run;
                current = bit;
                run = 1;
            }
        }
    }
    out << ' ' << run << "\n";
    if (!out) throw std::runtime_error("save_genome: write failed for " + path);
}

struct GenomeFile {
    SelectionMatrix genome;
    double r_t = 0.0;
    double seed_freq_hz = 0.0;
};

inline GenomeFile load_genome(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_genome: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "frfs-genome v1")
        throw std::runtime_error("load_genome: bad magic/version in " + path);
    int n = 0;
    std::size_t q = 0;
    double r_t = 0.0, seed_freq = 0.0;
    std::string bits_line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "n_nodes") ss >> n;
        else if (key == "q") ss >> q;
        else if (key == "r_t") ss >> r_t;
        else if (key == "seed_freq_hz") ss >> seed_freq;
        else if (key == "bits") { bits_line = line; break; }
        else throw std::runtime_error("load_genome: unknown key " + key);
    }
    if (n <= 0 || bits_line.empty())
        throw std::runtime_error("load_genome: missing header fields in " + path);
    std::istringstream ss(bits_line);
    std::string tag;
    int start_bit = 0;
    ss >> tag >> start_bit;
    SelectionMatrix genome(n);
    std::size_t pos = 0;
    const std::size_t total = genome.bit_count();
    bool bit = start_bit != 0;
    std::uint64_t run = 0;
    while (ss >> run) {
        for (std::uint64_t k = 0; k < run; ++k) {
            if (pos >= total) throw std::runtime_error("load_genome: runs exceed n*n");
            if (bit) genome.set(static_cast<int>(pos / static_cast<std::size_t>(n)),
                                static_cast<int>(pos % static_cast<std::size_t>(n)));
            ++pos;
        }
        bit = !bit;
    }
    if (pos != total) throw std::runtime_error("load_genome: runs do not cover n*n bits");
    if (genome.popcount() != q)
        throw std::runtime_error("load_genome: header q does not match bit count");
    return {std::move(genome), r_t, seed_freq};
}

inline void save_history(const GaHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_history: cannot open " + path);
    out << "generation,best_f,best_q,best_r\n";
    for (const auto& e : history.entries)
        out << e.generation << ',' << detail::format_full(e.best_fitness) << ',' << e.best_q
            << ',' << detail::format_full(e.best_r_err) << '\n';
    if (!out) throw std::runtime_error("save_history: write failed for " + path);
}

}  // namespace frfs
