#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "frfs/dataset.hpp"
#include "frfs/parallel.hpp"
#include "frfs/rng.hpp"

namespace frfs {

/// One structural mode: natural frequency, viscous damping ratio, half-wave
/// counts of the shape along each axis, per-direction weights, and the
/// travelling-wave fraction of the shape (0 = pure standing wave).
struct Mode {
    double freq_hz = 0.0;
    double damping = 0.02;       // zeta, in (0, 1)
    int half_waves_x = 0;        // p
    int half_waves_y = 0;        // q
    int half_waves_z = 0;        // s
    std::array<double, 3> direction_weight = {1.0, 0.0, 0.0};  // |c| = 1
    double wave_mix = 0.0;       // gamma, quadrature share in (complex) shapes
};

/// Synthetic modal model of a box-shaped structure. Immutable once built;
/// safe to share across threads.
struct StructureModel {
    double length_x = 0.5, length_y = 0.25, length_z = 0.05;
    std::vector<std::array<double, 3>> nodes;  // grid over the box, cell centres
    std::vector<Mode> modes;
    double noise_floor_amp = 0.0;  // added to |H| before the dB conversion
    std::uint64_t seed = 0;

    int node_count() const { return static_cast<int>(nodes.size()); }

    /// Shape component for direction dir (1..3) of one mode at a node. The
    /// in-plane factors are travelling/standing mixes,
    ///   f_u = sin(k_u u) + i gamma cos(k_u u),
    /// which reduce to the clamped standing wave sin((p+1) pi x / Lx) etc.
    /// at gamma = 0; the z factor is cos(s pi z / Lz). A nonzero gamma keeps
    /// |shape| bounded away from zero, the complex-mode signature of a
    /// heavily damped laminated structure.
    std::complex<double> mode_shape(const Mode& m, int dir, int node) const {
        const auto& pt = nodes[static_cast<std::size_t>(node)];
        constexpr double pi = std::numbers::pi;
        const double ax = (m.half_waves_x + 1) * pi * pt[0] / length_x;
        const double ay = (m.half_waves_y + 1) * pi * pt[1] / length_y;
        const std::complex<double> fx(std::sin(ax), m.wave_mix * std::cos(ax));
        const std::complex<double> fy(std::sin(ay), m.wave_mix * std::cos(ay));
        const double cz = std::cos(m.half_waves_z * pi * pt[2] / length_z);
        return m.direction_weight[static_cast<std::size_t>(dir - 1)] * fx * fy * cz;
    }
};

enum class SpatialOrder {
    kLadder,   // mode k gets the k-th lowest in-plane wavenumber order
    kUniform,  // spatial orders drawn independently of frequency
};

struct OracleConfig {
    int grid_nx = 8, grid_ny = 5, grid_nz = 2;
    double length_x = 0.5, length_y = 0.25, length_z = 0.05;
    int mode_count = 12;
    double damping_ratio = 0.12;
    SpatialOrder spatial_order = SpatialOrder::kLadder;
    // anisotropy of the direction weights: off-axis components are at most
    // this fraction of the dominant one (1 reproduces isotropic draws)
    double direction_anisotropy = 0.05;
    double wave_mix = 0.4;  // gamma; 0 gives pure standing-wave shapes
    // acquisition noise floor in dB: magnitudes are reported as
    // |H| + 10^(floor/20), the way an interference null disappears into the
    // sensor noise of a physical measurement chain
    double noise_floor_db = -150.0;
    std::uint64_t seed = 0;
};

struct FrfQuery {
    int response_node = 0;  // i
    int response_dir = 1;   // d in {1,2,3}
    int force_node = 0;     // j
    int force_dir = 1;      // e in {1,2,3}
    double freq_hz = 0.0;   // f_c
};

/// dB floor keeps log10 finite at symmetry-null node pairs.
inline constexpr double kMagnitudeFloor = 1e-30;

/// First modal frequencies match the reference box structure; the rest are
/// seeded into this band so typical evaluation frequencies sit inside it.
inline constexpr std::array<double, 4> kBaseModeFreqsHz = {24.5, 32.8, 51.5, 128.9};
inline constexpr double kExtraModeBandLowHz = 130.0;
inline constexpr double kExtraModeBandHighHz = 300.0;

namespace detail {
inline void validate(const OracleConfig& cfg) {
    if (cfg.grid_nx < 2 || cfg.grid_ny < 2 || cfg.grid_nz < 2)
        throw std::invalid_argument("build_structure: degenerate axis (grid counts must be >= 2)");
    if (cfg.mode_count < 1)
        throw std::invalid_argument("build_structure: mode count must be >= 1");
    if (cfg.length_x <= 0 || cfg.length_y <= 0 || cfg.length_z <= 0)
        throw std::invalid_argument("build_structure: dimensions must be positive");
    if (cfg.damping_ratio <= 0 || cfg.damping_ratio >= 1)
        throw std::invalid_argument("build_structure: damping ratio must be in (0, 1)");
    if (cfg.direction_anisotropy <= 0 || cfg.direction_anisotropy > 1)
        throw std::invalid_argument("build_structure: direction anisotropy must be in (0, 1]");
    if (cfg.wave_mix < 0 || cfg.wave_mix > 1)
        throw std::invalid_argument("build_structure: wave mix must be in [0, 1]");
}
}  // namespace detail

/// Builds the deterministic synthetic structure. Nodes form a cell-centred
/// grid (strictly inside the box, so no node sits on a shape null plane).
/// In kLadder mode spatial orders follow the canonical dispersion ladder:
/// mode k takes the k-th lowest in-plane wavenumber pair, which is how
/// shrinking wavelengths track rising natural frequency in a real plate-like
/// structure; kUniform draws the orders independently of frequency instead.
inline StructureModel build_structure(const OracleConfig& cfg) {
    detail::validate(cfg);
    StructureModel model;
    model.length_x = cfg.length_x;
    model.length_y = cfg.length_y;
    model.length_z = cfg.length_z;
    model.noise_floor_amp = std::pow(10.0, cfg.noise_floor_db / 20.0);
    model.seed = cfg.seed;

    model.nodes.reserve(static_cast<std::size_t>(cfg.grid_nx) * cfg.grid_ny * cfg.grid_nz);
    for (int ix = 0; ix < cfg.grid_nx; ++ix)
        for (int iy = 0; iy < cfg.grid_ny; ++iy)
            for (int iz = 0; iz < cfg.grid_nz; ++iz)
                model.nodes.push_back({(ix + 0.5) * cfg.length_x / cfg.grid_nx,
                                       (iy + 0.5) * cfg.length_y / cfg.grid_ny,
                                       (iz + 0.5) * cfg.length_z / cfg.grid_nz});

    Rng rng(substream(cfg.seed, {0x5EEDu}));

    const int m = cfg.mode_count;
    std::vector<double> freqs;
    freqs.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < std::min(m, 4); ++k) freqs.push_back(kBaseModeFreqsHz[static_cast<std::size_t>(k)]);
    std::vector<double> extras;
    for (int k = 4; k < m; ++k)
        extras.push_back(kExtraModeBandLowHz +
                         rng.uniform01_open_low() * (kExtraModeBandHighHz - kExtraModeBandLowHz));
    std::sort(extras.begin(), extras.end());
    freqs.insert(freqs.end(), extras.begin(), extras.end());

    struct Shape {
        int p, q, s;
    };
    std::vector<Shape> shapes;
    shapes.reserve(static_cast<std::size_t>(m));
    if (cfg.spatial_order == SpatialOrder::kLadder) {
        // enumerate (p, q) by ascending in-plane wavenumber; each order is
        // used twice, first without and then with z variation
        std::vector<std::pair<int, int>> ladder;
        const int span = m;  // more than enough candidates
        for (int p = 0; p <= span; ++p)
            for (int q = 0; q <= span; ++q) ladder.emplace_back(p, q);
        const auto k2 = [&](const std::pair<int, int>& pq) {
            const double kx = (pq.first + 1) / cfg.length_x;
            const double ky = (pq.second + 1) / cfg.length_y;
            return kx * kx + ky * ky;
        };
        std::sort(ladder.begin(), ladder.end(),
                  [&](const auto& a, const auto& b) { return k2(a) < k2(b); });
        for (int k = 0; k < m; ++k)
            shapes.push_back({ladder[static_cast<std::size_t>(k / 2)].first,
                              ladder[static_cast<std::size_t>(k / 2)].second, k % 2});
    } else {
        for (int k = 0; k < m; ++k)
            shapes.push_back({static_cast<int>(rng.below(4)), static_cast<int>(rng.below(4)),
                              static_cast<int>(rng.below(2))});
    }

    model.modes.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        Mode mode;
        mode.freq_hz = freqs[static_cast<std::size_t>(k)];
        mode.damping = cfg.damping_ratio;
        mode.half_waves_x = shapes[static_cast<std::size_t>(k)].p;
        mode.half_waves_y = shapes[static_cast<std::size_t>(k)].q;
        mode.half_waves_z = shapes[static_cast<std::size_t>(k)].s;
        mode.wave_mix = cfg.wave_mix;
        // one dominant displacement axis per mode; the off-axis components
        // are scaled by the anisotropy factor
        const int dominant = static_cast<int>(rng.below(3));
        double norm = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double mag = d == dominant ? rng.uniform(0.7, 1.0)
                                             : cfg.direction_anisotropy * rng.uniform01();
            mode.direction_weight[static_cast<std::size_t>(d)] =
                (rng.bernoulli(0.5) ? 1.0 : -1.0) * mag;
        }
        norm = std::sqrt(mode.direction_weight[0] * mode.direction_weight[0] +
                         mode.direction_weight[1] * mode.direction_weight[1] +
                         mode.direction_weight[2] * mode.direction_weight[2]);
        for (auto& c : mode.direction_weight) c /= norm;
        model.modes.push_back(mode);
    }
    return model;
}

namespace detail {
inline void validate(const StructureModel& model, const FrfQuery& q) {
    const int n = model.node_count();
    if (q.response_node < 0 || q.response_node >= n || q.force_node < 0 || q.force_node >= n)
        throw std::invalid_argument("frf_complex: node index out of range");
    if (q.response_dir < 1 || q.response_dir > 3 || q.force_dir < 1 || q.force_dir > 3)
        throw std::invalid_argument("frf_complex: direction must be in {1,2,3}");
    if (!(q.freq_hz > 0))
        throw std::invalid_argument("frf_complex: frequency must be positive");
}
}  // namespace detail

/// Modal superposition with unit modal mass:
///   H = sum_n phi_{n,d}(x_i) phi_{n,e}(x_j) / (w_n^2 - w^2 + 2 i zeta_n w w_n).
/// Each term is symmetric in (i,d) <-> (j,e) (complex multiplication of the
/// same two shape values commutes) and the summation order is fixed, so
/// reciprocity holds bit-exactly.
inline std::complex<double> frf_complex(const StructureModel& model, const FrfQuery& q) {
    detail::validate(model, q);
    const double omega = 2.0 * std::numbers::pi * q.freq_hz;
    std::complex<double> sum = 0.0;
    for (const Mode& mode : model.modes) {
        const double omega_n = 2.0 * std::numbers::pi * mode.freq_hz;
        const std::complex<double> phi_resp = model.mode_shape(mode, q.response_dir, q.response_node);
        const std::complex<double> phi_force = model.mode_shape(mode, q.force_dir, q.force_node);
        const std::complex<double> denom(omega_n * omega_n - omega * omega,
                                         2.0 * mode.damping * omega * omega_n);
        sum += phi_resp * phi_force / denom;
    }
    return sum;
}

/// Full 9 N^2 table at one frequency, rows in canonical (i, j, d, e)
/// lexicographic order. Row values do not depend on the thread count.
inline FrfTable dataset_at_frequency(const StructureModel& model, double freq_hz,
                                     int threads = 1) {
    if (!(freq_hz > 0))
        throw std::invalid_argument("dataset_at_frequency: frequency must be positive");
    const int n = model.node_count();
    if (n == 0) throw std::invalid_argument("dataset_at_frequency: empty model");

    // Precompute shape values phi[mode][node][dir] and per-mode denominators.
    const std::size_t mode_count = model.modes.size();
    std::vector<std::complex<double>> phi(mode_count * static_cast<std::size_t>(n) * 3);
    const auto phi_at = [&](std::size_t mode, int node, int dir) -> std::complex<double>& {
        return phi[(mode * static_cast<std::size_t>(n) + static_cast<std::size_t>(node)) * 3 +
                   static_cast<std::size_t>(dir - 1)];
    };
    for (std::size_t mi = 0; mi < mode_count; ++mi)
        for (int node = 0; node < n; ++node)
            for (int dir = 1; dir <= 3; ++dir)
                phi_at(mi, node, dir) = model.mode_shape(model.modes[mi], dir, node);

    // Same arithmetic as frf_complex (division, fixed mode order), so every
    // row matches a per-query recomputation bit for bit.
    const double omega = 2.0 * std::numbers::pi * freq_hz;
    std::vector<std::complex<double>> denom(mode_count);
    for (std::size_t mi = 0; mi < mode_count; ++mi) {
        const double omega_n = 2.0 * std::numbers::pi * model.modes[mi].freq_hz;
        denom[mi] = std::complex<double>(omega_n * omega_n - omega * omega,
                                         2.0 * model.modes[mi].damping * omega * omega_n);
    }

    FrfTable table;
    table.freq_hz = freq_hz;
    table.node_count = n;
    table.rows.resize(full_row_count(static_cast<std::uint64_t>(n)));

    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i_sz) {
        const int i = static_cast<int>(i_sz);
        std::size_t row_idx = i_sz * static_cast<std::size_t>(n) * 9;
        for (int j = 0; j < n; ++j) {
            for (int d = 1; d <= 3; ++d) {
                for (int e = 1; e <= 3; ++e) {
                    std::complex<double> h = 0.0;
                    for (std::size_t mi = 0; mi < mode_count; ++mi)
                        h += phi_at(mi, i, d) * phi_at(mi, j, e) / denom[mi];
                    FrfSample& r = table.rows[row_idx++];
                    r.response_node = i;
                    r.force_node = j;
                    r.response_dir = d;
                    r.force_dir = e;
                    const auto& pj = model.nodes[static_cast<std::size_t>(j)];
                    const auto& pi_ = model.nodes[static_cast<std::size_t>(i)];
                    r.force_x = pj[0];
                    r.force_y = pj[1];
                    r.force_z = pj[2];
                    r.response_x = pi_[0];
                    r.response_y = pi_[1];
                    r.response_z = pi_[2];
                    r.target_db = 20.0 * std::log10(std::abs(h) + kMagnitudeFloor);
                }
            }
        }
    });
    return table;
}

}  // namespace frfs
