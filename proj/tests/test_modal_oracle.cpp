#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "frfs/modal_oracle.hpp"

using namespace frfs;
using Catch::Approx;

namespace {
OracleConfig small_config() {
    OracleConfig cfg;
    cfg.grid_nx = cfg.grid_ny = cfg.grid_nz = 2;
    cfg.mode_count = 4;
    cfg.seed = 7;
    return cfg;
}
}  // namespace

TEST_CASE("build_structure produces the expected grid and base modes", "[oracle]") {
    const StructureModel model = build_structure(small_config());
    REQUIRE(model.node_count() == 8);
    REQUIRE(model.modes.size() == 4);
    REQUIRE(model.modes[0].freq_hz == 24.5);
    REQUIRE(model.modes[1].freq_hz == 32.8);
    REQUIRE(model.modes[2].freq_hz == 51.5);
    REQUIRE(model.modes[3].freq_hz == 128.9);
    for (const auto& node : model.nodes) {
        REQUIRE(node[0] > 0.0);
        REQUIRE(node[0] < model.length_x);
        REQUIRE(node[1] > 0.0);
        REQUIRE(node[1] < model.length_y);
        REQUIRE(node[2] > 0.0);
        REQUIRE(node[2] < model.length_z);
    }
    for (const auto& mode : model.modes) {
        const auto& c = mode.direction_weight;
        REQUIRE(std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]) == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("extra mode frequencies are seeded, sorted, and inside the band", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.mode_count = 12;
    const StructureModel model = build_structure(cfg);
    REQUIRE(model.modes.size() == 12);
    for (std::size_t k = 4; k < 12; ++k) {
        REQUIRE(model.modes[k].freq_hz > kExtraModeBandLowHz);
        REQUIRE(model.modes[k].freq_hz <= kExtraModeBandHighHz);
    }
    for (std::size_t k = 1; k < 12; ++k)
        REQUIRE(model.modes[k].freq_hz >= model.modes[k - 1].freq_hz);
}

TEST_CASE("ladder spatial order couples wavenumber to frequency", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.mode_count = 12;
    const StructureModel model = build_structure(cfg);
    const auto k2 = [&](const Mode& m) {
        const double kx = (m.half_waves_x + 1) / cfg.length_x;
        const double ky = (m.half_waves_y + 1) / cfg.length_y;
        return kx * kx + ky * ky;
    };
    for (std::size_t k = 1; k < model.modes.size(); ++k)
        REQUIRE(k2(model.modes[k]) >= k2(model.modes[k - 1]));
    // both z variants of each in-plane order appear
    REQUIRE(model.modes[0].half_waves_z == 0);
    REQUIRE(model.modes[1].half_waves_z == 1);
    REQUIRE(model.modes[0].half_waves_x == model.modes[1].half_waves_x);

    // the uniform mode stays available and differs
    cfg.spatial_order = SpatialOrder::kUniform;
    const StructureModel uniform = build_structure(cfg);
    bool monotone = true;
    for (std::size_t k = 1; k < uniform.modes.size(); ++k)
        monotone &= k2(uniform.modes[k]) >= k2(uniform.modes[k - 1]);
    REQUIRE_FALSE(monotone);
}

TEST_CASE("build_structure rejects bad configs", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.grid_nx = 1;
    REQUIRE_THROWS_AS(build_structure(cfg), std::invalid_argument);
    cfg = small_config();
    cfg.mode_count = 0;
    REQUIRE_THROWS_AS(build_structure(cfg), std::invalid_argument);
    cfg = small_config();
    cfg.length_z = 0.0;
    REQUIRE_THROWS_AS(build_structure(cfg), std::invalid_argument);
}

TEST_CASE("identical config and seed give bit-identical models", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.mode_count = 12;
    const StructureModel a = build_structure(cfg);
    const StructureModel b = build_structure(cfg);
    REQUIRE(a.nodes == b.nodes);
    REQUIRE(a.modes.size() == b.modes.size());
    for (std::size_t k = 0; k < a.modes.size(); ++k) {
        REQUIRE(a.modes[k].freq_hz == b.modes[k].freq_hz);
        REQUIRE(a.modes[k].direction_weight == b.modes[k].direction_weight);
        REQUIRE(a.modes[k].half_waves_x == b.modes[k].half_waves_x);
    }
    cfg.seed = 8;
    const StructureModel c = build_structure(cfg);
    bool differs = false;
    for (std::size_t k = 0; k < a.modes.size(); ++k)
        differs |= a.modes[k].direction_weight != c.modes[k].direction_weight;
    REQUIRE(differs);
}

TEST_CASE("reciprocity is bit-exact", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.mode_count = 12;
    const StructureModel model = build_structure(cfg);
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        FrfQuery q;
        q.response_node = static_cast<int>(rng.below(8));
        q.force_node = static_cast<int>(rng.below(8));
        q.response_dir = 1 + static_cast<int>(rng.below(3));
        q.force_dir = 1 + static_cast<int>(rng.below(3));
        q.freq_hz = rng.uniform(1.0, 400.0);
        FrfQuery swapped = q;
        std::swap(swapped.response_node, swapped.force_node);
        std::swap(swapped.response_dir, swapped.force_dir);
        const std::complex<double> a = frf_complex(model, q);
        const std::complex<double> b = frf_complex(model, swapped);
        REQUIRE(a.real() == b.real());
        REQUIRE(a.imag() == b.imag());
    }
}

TEST_CASE("single mode at resonance is purely imaginary per the hand formula", "[oracle]") {
    StructureModel model;
    model.length_x = 0.5;
    model.length_y = 0.25;
    model.length_z = 0.05;
    model.nodes = {{0.1, 0.05, 0.02}, {0.3, 0.15, 0.03}};
    Mode mode;
    mode.freq_hz = 40.0;
    mode.damping = 0.02;
    mode.half_waves_x = 1;
    mode.half_waves_y = 0;
    mode.half_waves_z = 1;
    mode.direction_weight = {0.6, 0.8, 0.0};
    model.modes = {mode};

    FrfQuery q{0, 1, 1, 2, mode.freq_hz};
    const std::complex<double> h = frf_complex(model, q);
    const double omega_n = 2.0 * std::numbers::pi * mode.freq_hz;
    const std::complex<double> phi_i = model.mode_shape(mode, 1, 0);
    const std::complex<double> phi_j = model.mode_shape(mode, 2, 1);
    REQUIRE(phi_i.imag() == 0.0);  // standing-wave mode: real shape
    // at omega = omega_n the real part of the denominator vanishes:
    // H = phi_i phi_j / (2 i zeta omega_n^2)
    const std::complex<double> expected =
        phi_i * phi_j / std::complex<double>(0.0, 2.0 * mode.damping * omega_n * omega_n);
    REQUIRE(h.real() == Approx(expected.real()).margin(1e-18));
    REQUIRE(h.imag() == Approx(expected.imag()).epsilon(1e-12));
    REQUIRE(std::abs(h.real()) < 1e-15 * std::abs(h.imag()));
}

TEST_CASE("two-mode sum matches an independent term-by-term evaluation", "[oracle]") {
    StructureModel model;
    model.length_x = 0.4;
    model.length_y = 0.2;
    model.length_z = 0.1;
    model.nodes = {{0.1, 0.05, 0.04}, {0.25, 0.12, 0.06}};
    Mode m1, m2;
    m1.freq_hz = 30.0;
    m1.damping = 0.02;
    m1.half_waves_x = 0;
    m1.half_waves_y = 1;
    m1.half_waves_z = 0;
    m1.direction_weight = {1.0, 0.0, 0.0};
    m2.freq_hz = 90.0;
    m2.damping = 0.05;
    m2.half_waves_x = 2;
    m2.half_waves_y = 0;
    m2.half_waves_z = 1;
    m2.direction_weight = {0.0, -0.6, 0.8};
    m2.wave_mix = 0.3;  // one mode with a travelling-wave component
    model.modes = {m1, m2};

    constexpr double pi = std::numbers::pi;
    for (const double freq : {10.0, 45.0, 120.0}) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int d = 1; d <= 3; ++d)
                    for (int e = 1; e <= 3; ++e) {
                        const FrfQuery q{i, d, j, e, freq};
                        const std::complex<double> got = frf_complex(model, q);
                        // independent evaluation, term by term
                        std::complex<double> want = 0.0;
                        const double w = 2.0 * pi * freq;
                        for (const Mode& m : model.modes) {
                            const double wn = 2.0 * pi * m.freq_hz;
                            const auto shape = [&](int dir, int node) {
                                const auto& pt = model.nodes[static_cast<std::size_t>(node)];
                                const double ax = (m.half_waves_x + 1) * pi * pt[0] / model.length_x;
                                const double ay = (m.half_waves_y + 1) * pi * pt[1] / model.length_y;
                                const std::complex<double> fx(std::sin(ax), m.wave_mix * std::cos(ax));
                                const std::complex<double> fy(std::sin(ay), m.wave_mix * std::cos(ay));
                                return m.direction_weight[static_cast<std::size_t>(dir - 1)] * fx *
                                       fy * std::cos(m.half_waves_z * pi * pt[2] / model.length_z);
                            };
                            want += shape(d, i) * shape(e, j) /
                                    std::complex<double>(wn * wn - w * w, 2.0 * m.damping * w * wn);
                        }
                        REQUIRE(std::abs(got - want) <= 1e-12 * (1.0 + std::abs(want)));
                    }
    }
}

TEST_CASE("low-frequency magnitude approaches the static modal sum", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.mode_count = 12;
    const StructureModel model = build_structure(cfg);
    const FrfQuery q{0, 1, 5, 2, 0.01};
    const double dynamic = std::abs(frf_complex(model, q));
    std::complex<double> static_sum = 0.0;
    for (const Mode& m : model.modes) {
        const double wn = 2.0 * std::numbers::pi * m.freq_hz;
        static_sum += model.mode_shape(m, 1, 0) * model.mode_shape(m, 2, 5) / (wn * wn);
    }
    REQUIRE(dynamic == Approx(std::abs(static_sum)).epsilon(0.01));
}

TEST_CASE("dataset_at_frequency row counts and ordering", "[oracle]") {
    const StructureModel model = build_structure(small_config());
    const FrfTable table = dataset_at_frequency(model, 100.0);
    REQUIRE(table.rows.size() == 576);  // 9 * 8^2
    REQUIRE(table.freq_hz == 100.0);
    // canonical (i, j, d, e) lexicographic order
    std::size_t idx = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int d = 1; d <= 3; ++d)
                for (int e = 1; e <= 3; ++e, ++idx) {
                    REQUIRE(table.rows[idx].response_node == i);
                    REQUIRE(table.rows[idx].force_node == j);
                    REQUIRE(table.rows[idx].response_dir == d);
                    REQUIRE(table.rows[idx].force_dir == e);
                }
    REQUIRE_THROWS_AS(dataset_at_frequency(model, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(dataset_at_frequency(model, -5.0), std::invalid_argument);
}

TEST_CASE("every table target matches a per-query recomputation", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.mode_count = 6;
    const StructureModel model = build_structure(cfg);
    const FrfTable table = dataset_at_frequency(model, 77.0);
    for (const auto& row : table.rows) {
        const FrfQuery q{row.response_node, row.response_dir, row.force_node, row.force_dir,
                         table.freq_hz};
        const double expected = 20.0 * std::log10(std::abs(frf_complex(model, q)) + kMagnitudeFloor);
        REQUIRE(row.target_db == expected);
    }
}

TEST_CASE("dataset is identical for any thread count", "[oracle]") {
    OracleConfig cfg = small_config();
    cfg.grid_nx = 3;
    cfg.mode_count = 8;
    const StructureModel model = build_structure(cfg);
    const FrfTable seq = dataset_at_frequency(model, 123.0, 1);
    const FrfTable par = dataset_at_frequency(model, 123.0, 8);
    REQUIRE(seq.rows.size() == par.rows.size());
    for (std::size_t k = 0; k < seq.rows.size(); ++k)
        REQUIRE(seq.rows[k].target_db == par.rows[k].target_db);
}

TEST_CASE("row features carry the right node coordinates", "[oracle]") {
    const StructureModel model = build_structure(small_config());
    const FrfTable table = dataset_at_frequency(model, 50.0);
    for (const auto& row : table.rows) {
        const auto& pj = model.nodes[static_cast<std::size_t>(row.force_node)];
        const auto& pi = model.nodes[static_cast<std::size_t>(row.response_node)];
        REQUIRE(row.force_x == pj[0]);
        REQUIRE(row.force_y == pj[1]);
        REQUIRE(row.force_z == pj[2]);
        REQUIRE(row.response_x == pi[0]);
        REQUIRE(row.response_y == pi[1]);
        REQUIRE(row.response_z == pi[2]);
    }
}
