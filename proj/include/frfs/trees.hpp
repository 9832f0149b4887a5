#pragma once

#include <algorithm>
#include <array>
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
#include "frfs/parallel.hpp"
#include "frfs/rng.hpp"

namespace frfs {

enum class SplitMode {
    kExtraRandom,     // one uniform random cut per candidate feature
    kBestExhaustive,  // scan all midpoints between consecutive sorted values
};

struct ForestParams {
    int tree_count = 100;      // B
    int mtry = kFeatureCount;  // variables sampled per node
    int min_node_size = 2;     // n_min; nodes with < 2*n_min samples become leaves
    bool bootstrap = true;
    SplitMode split_mode = SplitMode::kExtraRandom;
    std::uint64_t seed = 0;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    std::int32_t left = -1;
    std::int32_t right = -1;
    double threshold = 0.0;
    double value = 0.0;  // node mean (prediction for leaves)
    std::int32_t count = 0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const FeatureVector& x) const {
        std::int32_t id = 0;
        while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(id)];
            id = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(id)].value;
    }
};

struct FeatureImportance {
    std::array<double, kFeatureCount> weights{};
    bool no_splits = false;  // all-leaf forest; weights fall back to uniform 1/8
};

namespace detail {

struct TrainingData {
    std::array<std::vector<double>, kFeatureCount> feature;
    std::vector<double> target;
    std::size_t size() const { return target.size(); }
};

inline TrainingData make_training_data(const FrfTable& table) {
    TrainingData data;
    for (auto& col : data.feature) col.reserve(table.rows.size());
    data.target.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const FeatureVector x = row.features();
        for (int f = 0; f < kFeatureCount; ++f)
            data.feature[static_cast<std::size_t>(f)].push_back(x[static_cast<std::size_t>(f)]);
        data.target.push_back(row.target_db);
    }
    return data;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = -1.0;  // SSE decrease: n*var(parent) - nL*var(L) - nR*var(R)
};

// SSE decrease from left/right counts and target sums. Uses only first
// moments; the parent sum-of-squares cancels out of the difference.
inline double split_gain(double sum_left, std::size_t n_left, double sum_parent,
                         std::size_t n_parent) {
    const std::size_t n_right = n_parent - n_left;
    const double sum_right = sum_parent - sum_left;
    return sum_left * sum_left / static_cast<double>(n_left) +
           sum_right * sum_right / static_cast<double>(n_right) -
           sum_parent * sum_parent / static_cast<double>(n_parent);
}

}  // namespace detail

/// Ensemble of regression trees. Immutable once fitted; prediction is
/// reentrant.
class ForestModel {
public:
    ForestModel() = default;

    const ForestParams& params() const { return params_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }
    const std::vector<std::array<double, kFeatureCount>>& per_tree_importance_raw() const {
        return importance_raw_;
    }

    double predict_tree(std::size_t b, const FeatureVector& x) const {
        return trees_[b].predict(x);
    }

    /// Ensemble output: arithmetic mean of the member trees.
    double predict(const FeatureVector& x) const {
        if (trees_.empty()) throw std::logic_error("ForestModel: not fitted");
        double sum = 0.0;
        for (const auto& tree : trees_) sum += tree.predict(x);
        return sum / static_cast<double>(trees_.size());
    }

    std::vector<double> predict_table(const FrfTable& table, int threads = 1) const {
        std::vector<double> out(table.rows.size());
        parallel_for(table.rows.size(), threads,
                     [&](std::size_t i) { out[i] = predict(table.rows[i].features()); });
        return out;
    }

    /// Impurity-based importances: each split contributes its SSE decrease to
    /// its feature, summed over all trees and normalized to 1. A forest with
    /// no splits at all reports uniform weights and sets no_splits.
    FeatureImportance feature_importance() const {
        if (trees_.empty()) throw std::logic_error("ForestModel: not fitted");
        FeatureImportance out;
        double total = 0.0;
        for (const auto& per_tree : importance_raw_)
            for (int f = 0; f < kFeatureCount; ++f) {
                out.weights[static_cast<std::size_t>(f)] += per_tree[static_cast<std::size_t>(f)];
                total += per_tree[static_cast<std::size_t>(f)];
            }
        if (total <= 0.0) {
            out.no_splits = true;
            out.weights.fill(1.0 / kFeatureCount);
            return out;
        }
        for (auto& w : out.weights) w /= total;
        return out;
    }

    friend ForestModel fit_forest(const FrfTable&, const ForestParams&, int);
    friend void save_forest(const ForestModel&, const std::string&);
    friend ForestModel load_forest(const std::string&);

private:
    ForestParams params_{};
    std::vector<RegressionTree> trees_;
    std::vector<std::array<double, kFeatureCount>> importance_raw_;
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const TrainingData& data, const ForestParams& params, std::uint64_t tree_seed)
        : data_(data), params_(params), tree_seed_(tree_seed) {}

    RegressionTree build(std::array<double, kFeatureCount>& importance_out) {
        const std::size_t n = data_.size();
        indices_.resize(n);
        if (params_.bootstrap) {
            Rng boot(hash_combine(tree_seed_, 0xB007u));
            for (auto& idx : indices_) idx = static_cast<std::uint32_t>(boot.below(n));
        } else {
            std::iota(indices_.begin(), indices_.end(), 0U);
        }
        scratch_.resize(n);
        importance_.fill(0.0);

        RegressionTree tree;
        tree.nodes.reserve(64);
        tree.nodes.emplace_back();
        struct Frame {
            std::int32_t node;
            std::size_t begin, end;
            std::uint64_t path;
        };
        std::vector<Frame> stack;
        stack.push_back({0, 0, n, hash_combine(tree_seed_, 0x526F6F74u)});
        while (!stack.empty()) {
            const Frame fr = stack.back();
            stack.pop_back();
            grow(tree, fr.node, fr.begin, fr.end, fr.path, stack);
        }
        importance_out = importance_;
        return tree;
    }

private:
    template <class Stack>
    void grow(RegressionTree& tree, std::int32_t node_id, std::size_t begin, std::size_t end,
              std::uint64_t path, Stack& stack) {
        const std::size_t count = end - begin;
        double sum = 0.0;
        for (std::size_t k = begin; k < end; ++k) sum += data_.target[indices_[k]];
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.count = static_cast<std::int32_t>(count);
        node.value = sum / static_cast<double>(count);

        if (count < 2 * static_cast<std::size_t>(params_.min_node_size)) return;
        if (is_pure(begin, end)) return;

        // Per-node RNG keyed by the root-to-node path, so split decisions at
        // a given node do not depend on traversal order or sibling subtrees.
        Rng rng(path);
        const SplitChoice choice = pick_split(begin, end, sum, rng);
        if (choice.feature < 0) return;  // every candidate feature constant

        const std::size_t mid = partition(begin, end, choice.feature, choice.threshold);
        importance_[static_cast<std::size_t>(choice.feature)] += std::max(choice.gain, 0.0);

        const std::int32_t left_id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(node_id)];
        parent.feature = choice.feature;
        parent.threshold = choice.threshold;
        parent.left = left_id;
        parent.right = left_id + 1;
        stack.push_back({left_id + 1, mid, end, hash_combine(path, 2)});
        stack.push_back({left_id, begin, mid, hash_combine(path, 1)});
    }

    bool is_pure(std::size_t begin, std::size_t end) const {
        const double first = data_.target[indices_[begin]];
        for (std::size_t k = begin + 1; k < end; ++k)
            if (data_.target[indices_[k]] != first) return false;
        return true;
    }

    SplitChoice pick_split(std::size_t begin, std::size_t end, double sum_parent, Rng& rng) {
        std::array<int, kFeatureCount> feats;
        std::iota(feats.begin(), feats.end(), 0);
        const int mtry = params_.mtry;
        for (int k = 0; k < mtry; ++k) {
            const int pick = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(kFeatureCount - k)));
            std::swap(feats[static_cast<std::size_t>(k)], feats[static_cast<std::size_t>(pick)]);
        }
        std::sort(feats.begin(), feats.begin() + mtry);

        // Per-candidate value ranges first; threshold draws afterwards in a
        // fixed order keep the RNG sequence well-defined.
        std::array<double, kFeatureCount> lo{}, hi{};
        for (int c = 0; c < mtry; ++c) {
            const auto& col = data_.feature[static_cast<std::size_t>(feats[static_cast<std::size_t>(c)])];
            double mn = col[indices_[begin]], mx = mn;
            for (std::size_t k = begin + 1; k < end; ++k) {
                const double v = col[indices_[k]];
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            lo[static_cast<std::size_t>(c)] = mn;
            hi[static_cast<std::size_t>(c)] = mx;
        }

        SplitChoice best;
        const std::size_t n = end - begin;
        if (params_.split_mode == SplitMode::kExtraRandom) {
            for (int c = 0; c < mtry; ++c) {
                const int f = feats[static_cast<std::size_t>(c)];
                const double mn = lo[static_cast<std::size_t>(c)], mx = hi[static_cast<std::size_t>(c)];
                if (mn == mx) continue;
                double thr = rng.uniform(mn, mx);
                if (thr >= mx) thr = std::nextafter(mx, mn);  // rounding guard
                if (thr < mn) thr = mn;
                const auto& col = data_.feature[static_cast<std::size_t>(f)];
                double sum_left = 0.0;
                std::size_t n_left = 0;
                for (std::size_t k = begin; k < end; ++k) {
                    if (col[indices_[k]] <= thr) {
                        sum_left += data_.target[indices_[k]];
                        ++n_left;
                    }
                }
                const double gain = split_gain(sum_left, n_left, sum_parent, n);
                if (consider(best, gain, f, thr)) best = {f, thr, gain};
            }
        } else {
            sort_buffer_.resize(n);
            for (int c = 0; c < mtry; ++c) {
                const int f = feats[static_cast<std::size_t>(c)];
                if (lo[static_cast<std::size_t>(c)] == hi[static_cast<std::size_t>(c)]) continue;
                const auto& col = data_.feature[static_cast<std::size_t>(f)];
                for (std::size_t k = 0; k < n; ++k) {
                    sort_buffer_[k] = {col[indices_[begin + k]], data_.target[indices_[begin + k]]};
                }
                std::sort(sort_buffer_.begin(), sort_buffer_.end(),
                          [](const auto& a, const auto& b) { return a.first < b.first; });
                double sum_left = 0.0;
                for (std::size_t k = 0; k + 1 < n; ++k) {
                    sum_left += sort_buffer_[k].second;
                    const double a = sort_buffer_[k].first;
                    const double b = sort_buffer_[k + 1].first;
                    if (a == b) continue;
                    double thr = a + (b - a) / 2.0;
                    if (thr >= b || thr < a) thr = a;  // adjacent-value rounding guard
                    const double gain = split_gain(sum_left, k + 1, sum_parent, n);
                    if (consider(best, gain, f, thr)) best = {f, thr, gain};
                }
            }
        }
        return best;
    }

    // Greatest gain wins; ties fall to the lowest feature index, then the
    // lowest threshold.
    static bool consider(const SplitChoice& best, double gain, int feature, double threshold) {
        if (best.feature < 0) return true;
        if (gain != best.gain) return gain > best.gain;
        if (feature != best.feature) return feature < best.feature;
        return threshold < best.threshold;
    }

    std::size_t partition(std::size_t begin, std::size_t end, int feature, double threshold) {
        const auto& col = data_.feature[static_cast<std::size_t>(feature)];
        std::size_t left = begin;
        std::size_t right = 0;
        for (std::size_t k = begin; k < end; ++k) {
            const std::uint32_t idx = indices_[k];
            if (col[idx] <= threshold)
                indices_[left++] = idx;
            else
                scratch_[right++] = idx;
        }
        std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(right),
                  indices_.begin() + static_cast<std::ptrdiff_t>(left));
        return left;
    }

    const TrainingData& data_;
    const ForestParams& params_;
    std::uint64_t tree_seed_;
    std::vector<std::uint32_t> indices_;
    std::vector<std::uint32_t> scratch_;
    std::vector<std::pair<double, double>> sort_buffer_;
    std::array<double, kFeatureCount> importance_{};
};

}  // namespace detail

/// Grows params.tree_count trees. Each tree draws from its own substream, so
/// parallel and sequential fits produce bit-identical models.
inline ForestModel fit_forest(const FrfTable& train, const ForestParams& params,
                              int threads = 1) {
    if (train.rows.empty()) throw std::invalid_argument("fit_forest: empty training set");
    if (params.tree_count < 1) throw std::invalid_argument("fit_forest: tree_count must be >= 1");
    if (params.mtry < 1 || params.mtry > kFeatureCount)
        throw std::invalid_argument("fit_forest: mtry must be in [1, 8]");
    if (params.min_node_size < 1)
        throw std::invalid_argument("fit_forest: min_node_size must be >= 1");

    const detail::TrainingData data = detail::make_training_data(train);
    ForestModel model;
    model.params_ = params;
    model.trees_.resize(static_cast<std::size_t>(params.tree_count));
    model.importance_raw_.resize(static_cast<std::size_t>(params.tree_count));
    parallel_for(static_cast<std::size_t>(params.tree_count), threads, [&](std::size_t b) {
        detail::TreeBuilder builder(data, params, substream(params.seed, {0x7265E5u, b}));
        model.trees_[b] = builder.build(model.importance_raw_[b]);
    });
    return model;
}

inline const char* split_mode_name(SplitMode mode) {
    return mode == SplitMode::kExtraRandom ? "extra_random" : "best_exhaustive";
}

inline SplitMode split_mode_from_name(const std::string& name) {
    if (name == "extra_random") return SplitMode::kExtraRandom;
    if (name == "best_exhaustive") return SplitMode::kBestExhaustive;
    throw std::invalid_argument("unknown split mode: " + name);
}

/// Versioned plain-text model file.
inline void save_forest(const ForestModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_forest: cannot open " + path);
    const ForestParams& p = model.params_;
    out << "frfs-forest v1\n";
    out << "params trees=" << p.tree_count << " mtry=" << p.mtry
        << " min_node_size=" << p.min_node_size << " bootstrap=" << (p.bootstrap ? 1 : 0)
        << " split_mode=" << split_mode_name(p.split_mode) << " seed=" << p.seed << "\n";
    for (std::size_t b = 0; b < model.trees_.size(); ++b) {
        const auto& tree = model.trees_[b];
        out << "tree " << b << " nodes " << tree.nodes.size() << "\n";
        out << "importance";
        for (double v : model.importance_raw_[b]) out << ' ' << detail::format_full(v);
        out << "\n";
        for (const auto& nd : tree.nodes)
            out << nd.feature << ' ' << nd.left << ' ' << nd.right << ' '
                << detail::format_full(nd.threshold) << ' ' << detail::format_full(nd.value)
                << ' ' << nd.count << "\n";
    }
    out << "end\n";
    if (!out) throw std::runtime_error("save_forest: write failed for " + path);
}

inline ForestModel load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_forest: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "frfs-forest v1")
        throw std::runtime_error("load_forest: bad magic/version in " + path);

    ForestModel model;
    if (!std::getline(in, line)) throw std::runtime_error("load_forest: truncated file");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "params") throw std::runtime_error("load_forest: expected params line");
        std::string kv;
        while (ss >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::runtime_error("load_forest: bad params token");
            const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
            if (key == "trees") model.params_.tree_count = std::stoi(value);
            else if (key == "mtry") model.params_.mtry = std::stoi(value);
            else if (key == "min_node_size") model.params_.min_node_size = std::stoi(value);
            else if (key == "bootstrap") model.params_.bootstrap = value == "1";
            else if (key == "split_mode") model.params_.split_mode = split_mode_from_name(value);
            else if (key == "seed") model.params_.seed = std::stoull(value);
            else throw std::runtime_error("load_forest: unknown params key " + key);
        }
    }
    while (std::getline(in, line)) {
        if (line == "end") {
            if (static_cast<int>(model.trees_.size()) != model.params_.tree_count)
                throw std::runtime_error("load_forest: tree count mismatch");
            return model;
        }
        std::istringstream header(line);
        std::string tag, nodes_tag;
        std::size_t tree_idx = 0, node_count = 0;
        header >> tag >> tree_idx >> nodes_tag >> node_count;
        if (tag != "tree" || nodes_tag != "nodes" || tree_idx != model.trees_.size())
            throw std::runtime_error("load_forest: bad tree header");
        if (!std::getline(in, line)) throw std::runtime_error("load_forest: truncated file");
        std::istringstream imp(line);
        imp >> tag;
        if (tag != "importance") throw std::runtime_error("load_forest: expected importance line");
        std::array<double, kFeatureCount> raw{};
        for (auto& v : raw)
            if (!(imp >> v)) throw std::runtime_error("load_forest: bad importance line");
        RegressionTree tree;
        tree.nodes.resize(node_count);
        for (auto& nd : tree.nodes) {
            if (!std::getline(in, line)) throw std::runtime_error("load_forest: truncated file");
            std::istringstream ns(line);
            if (!(ns >> nd.feature >> nd.left >> nd.right >> nd.threshold >> nd.value >> nd.count))
                throw std::runtime_error("load_forest: bad node line");
        }
        model.trees_.push_back(std::move(tree));
        model.importance_raw_.push_back(raw);
    }
    throw std::runtime_error("load_forest: missing end marker");
}

}  // namespace frfs
