#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "frfs/rng.hpp"

namespace frfs {

inline constexpr int kFeatureCount = 8;
using FeatureVector = std::array<double, kFeatureCount>;

/// Canonical feature order, shared by every model in the project.
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "force_dir", "resp_dir", "x_F", "y_F", "z_F", "x_R", "y_R", "z_R"};

/// One frequency response sample: force applied at node j in direction e,
/// response read at node i in direction d, magnitude in dB.
struct FrfSample {
    std::int32_t response_node = 0;  // i
    std::int32_t force_node = 0;     // j
    std::int32_t response_dir = 1;   // d in {1,2,3}
    std::int32_t force_dir = 1;      // e in {1,2,3}
    double force_x = 0, force_y = 0, force_z = 0;
    double response_x = 0, response_y = 0, response_z = 0;
    double target_db = 0;

    FeatureVector features() const {
        return {static_cast<double>(force_dir), static_cast<double>(response_dir),
                force_x, force_y, force_z, response_x, response_y, response_z};
    }
};

struct FrfTable {
    double freq_hz = 0.0;
    int node_count = 0;
    std::vector<FrfSample> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }

    std::vector<double> targets() const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.target_db);
        return out;
    }
};

/// Full-set row count at one frequency: 9 direction pairs per node pair.
inline std::uint64_t full_row_count(std::uint64_t node_count) {
    return 9ULL * node_count * node_count;
}

/// N x N bit matrix over node pairs. Bit (i, j) selects all nine
/// direction-pair FRFs between response node i and force node j.
class SelectionMatrix {
public:
    SelectionMatrix() = default;
    explicit SelectionMatrix(int n)
        : n_(n), bits_((static_cast<std::size_t>(n) * n + 63) / 64, 0) {
        if (n <= 0) throw std::invalid_argument("SelectionMatrix: n must be positive");
    }

    int n() const { return n_; }
    std::size_t bit_count() const { return static_cast<std::size_t>(n_) * n_; }

    bool test(int i, int j) const {
        const std::size_t b = index(i, j);
        return (bits_[b >> 6] >> (b & 63)) & 1ULL;
    }

    void set(int i, int j, bool value = true) {
        const std::size_t b = index(i, j);
        const std::uint64_t mask = 1ULL << (b & 63);
        const bool old = bits_[b >> 6] & mask;
        if (old == value) return;
        if (value) {
            bits_[b >> 6] |= mask;
            ++popcount_;
        } else {
            bits_[b >> 6] &= ~mask;
            --popcount_;
        }
    }

    void flip(int i, int j) { set(i, j, !test(i, j)); }

    /// Cached number of set bits (q).
    std::size_t popcount() const { return popcount_; }

    std::size_t recompute_popcount() const {
        std::size_t c = 0;
        for (std::uint64_t w : bits_) c += static_cast<std::size_t>(std::popcount(w));
        return c;
    }

    SelectionMatrix and_with(const SelectionMatrix& other) const {
        if (other.n_ != n_)
            throw std::invalid_argument("SelectionMatrix: dimension mismatch in AND");
        SelectionMatrix out(n_);
        for (std::size_t w = 0; w < bits_.size(); ++w) out.bits_[w] = bits_[w] & other.bits_[w];
        out.popcount_ = out.recompute_popcount();
        return out;
    }

    bool operator==(const SelectionMatrix& other) const {
        return n_ == other.n_ && bits_ == other.bits_;
    }

    static SelectionMatrix all_ones(int n) {
        SelectionMatrix s(n);
        for (std::size_t w = 0; w < s.bits_.size(); ++w) s.bits_[w] = ~0ULL;
        // clear padding beyond n*n
        const std::size_t extra = s.bits_.size() * 64 - s.bit_count();
        if (extra > 0) s.bits_.back() >>= extra;
        s.popcount_ = s.bit_count();
        return s;
    }

    /// Each bit set independently with probability density.
    static SelectionMatrix random_dense(int n, double density, Rng& rng) {
        SelectionMatrix s(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (rng.uniform01() < density) s.set(i, j);
        return s;
    }

    /// Uniformly random matrix with exactly q set bits (partial Fisher-Yates
    /// over flattened positions).
    static SelectionMatrix random_with_popcount(int n, std::size_t q, Rng& rng) {
        SelectionMatrix s(n);
        const std::size_t total = s.bit_count();
        if (q > total)
            throw std::invalid_argument("SelectionMatrix: q exceeds n*n");
        std::vector<std::uint32_t> positions(total);
        std::iota(positions.begin(), positions.end(), 0U);
        for (std::size_t k = 0; k < q; ++k) {
            const std::size_t pick = k + static_cast<std::size_t>(rng.below(total - k));
            std::swap(positions[k], positions[pick]);
            s.set(static_cast<int>(positions[k] / n), static_cast<int>(positions[k] % n));
        }
        return s;
    }

private:
    std::size_t index(int i, int j) const {
        if (i < 0 || i >= n_ || j < 0 || j >= n_)
            throw std::out_of_range("SelectionMatrix: index out of range");
        return static_cast<std::size_t>(i) * n_ + j;
    }

    int n_ = 0;
    std::vector<std::uint64_t> bits_;
    std::size_t popcount_ = 0;
};

/// Deterministic seeded half split: |train| = ceil(rows/2), |test| = floor.
inline std::pair<FrfTable, FrfTable> split_half(const FrfTable& table, std::uint64_t seed) {
    if (table.rows.size() < 2)
        throw std::invalid_argument("split_half: need at least 2 rows");
    std::vector<std::size_t> order(table.rows.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t k = order.size() - 1; k > 0; --k) {
        const std::size_t pick = static_cast<std::size_t>(rng.below(k + 1));
        std::swap(order[k], order[pick]);
    }
    const std::size_t train_size = (order.size() + 1) / 2;
    FrfTable train{table.freq_hz, table.node_count, {}};
    FrfTable test{table.freq_hz, table.node_count, {}};
    train.rows.reserve(train_size);
    test.rows.reserve(order.size() - train_size);
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < train_size ? train : test).rows.push_back(table.rows[order[k]]);
    return {std::move(train), std::move(test)};
}

/// Keeps exactly the rows whose (response_node, force_node) bit is set.
inline FrfTable select_rows(const FrfTable& table, const SelectionMatrix& selection) {
    if (selection.n() != table.node_count)
        throw std::invalid_argument("select_rows: selection matrix size does not match table");
    FrfTable out{table.freq_hz, table.node_count, {}};
    for (const auto& row : table.rows)
        if (selection.test(row.response_node, row.force_node)) out.rows.push_back(row);
    return out;
}

inline constexpr const char* kCsvHeader =
    "freq,i,j,force_dir,resp_dir,x_F,y_F,z_F,x_R,y_R,z_R,target_db";

namespace detail {
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

/// Writes the table as CSV. Doubles carry 17 significant digits so that
/// load() restores them exactly.
inline void persist(const FrfTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("persist: cannot open " + path);
    out << kCsvHeader << '\n';
    for (const auto& r : table.rows) {
        out << detail::format_full(table.freq_hz) << ',' << r.response_node << ','
            << r.force_node << ',' << r.force_dir << ',' << r.response_dir << ','
            << detail::format_full(r.force_x) << ',' << detail::format_full(r.force_y) << ','
            << detail::format_full(r.force_z) << ',' << detail::format_full(r.response_x) << ','
            << detail::format_full(r.response_y) << ',' << detail::format_full(r.response_z)
            << ',' << detail::format_full(r.target_db) << '\n';
    }
    if (!out) throw std::runtime_error("persist: write failed for " + path);
}

/// Reads a CSV produced by persist(). The node count is re-derived from the
/// largest node index present (the file format carries rows only).
inline FrfTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader)
        throw std::runtime_error("load: malformed header in " + path);
    FrfTable table;
    std::size_t line_no = 1;
    std::int32_t max_node = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::array<std::string, 12> fields;
        int count = 0;
        while (std::getline(ss, field, ',')) {
            if (count >= 12) break;
            fields[count++] = field;
        }
        if (count != 12)
            throw std::runtime_error("load: row " + std::to_string(line_no) +
                                     ": expected 12 fields");
        const auto as_double = [&](int idx) {
            std::size_t pos = 0;
            double v = std::stod(fields[idx], &pos);
            if (pos != fields[idx].size())
                throw std::runtime_error("load: row " + std::to_string(line_no) +
                                         ": bad number '" + fields[idx] + "'");
            return v;
        };
        const auto as_int = [&](int idx) { return static_cast<std::int32_t>(as_double(idx)); };
        FrfSample r;
        const double freq = as_double(0);
        r.response_node = as_int(1);
        r.force_node = as_int(2);
        r.force_dir = as_int(3);
        r.response_dir = as_int(4);
        r.force_x = as_double(5);
        r.force_y = as_double(6);
        r.force_z = as_double(7);
        r.response_x = as_double(8);
        r.response_y = as_double(9);
        r.response_z = as_double(10);
        r.target_db = as_double(11);
        if (r.force_dir < 1 || r.force_dir > 3 || r.response_dir < 1 || r.response_dir > 3)
            throw std::runtime_error("load: row " + std::to_string(line_no) +
                                     ": direction out of range 1..3");
        if (r.response_node < 0 || r.force_node < 0)
            throw std::runtime_error("load: row " + std::to_string(line_no) +
                                     ": negative node index");
        if (!std::isfinite(r.target_db))
            throw std::runtime_error("load: row " + std::to_string(line_no) +
                                     ": non-finite target");
        if (table.rows.empty()) {
            table.freq_hz = freq;
        } else if (freq != table.freq_hz) {
            throw std::runtime_error("load: row " + std::to_string(line_no) +
                                     ": frequency differs from table frequency");
        }
        max_node = std::max({max_node, r.response_node, r.force_node});
        table.rows.push_back(r);
    }
    table.node_count = max_node + 1;
    return table;
}

}  // namespace frfs
