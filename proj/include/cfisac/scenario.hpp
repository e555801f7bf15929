// Copyright 2026 The cfisac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfisac/common.hpp"
#include "cfisac/random.hpp"

namespace cfisac {

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Radio constants and entity counts of one deployment.
struct SystemConfig {
    std::size_t M = 4;  // DL APs
    std::size_t N = 4;  // UL APs
    std::size_t K = 3;  // users
    std::size_t T = 2;  // targets
    std::size_t L = 8;  // antennas per AP
    double area_side_m = 200.0;
    double fc_hz = 3e9;
    double bandwidth_hz = 10e6;
    double noise_psd_dbm_hz = -174.0;
    double noise_figure_db = 10.0;
    double rho = 1.0;
    double p_max_dbm = 30.0;
    std::uint64_t seed = 1;
    double shadowing_std_db = 0.0;
    /// Per-target RCS overrides (m^2); missing entries use kDefaultRcsM2.
    std::vector<double> target_rcs_m2;

    void validate() const;
    bool operator==(const SystemConfig&) const = default;
};

/// Approximate RCS of common objects, m^2.
struct RcsEntry {
    std::string_view name;
    double low_m2;
    double high_m2;
    /// Geometric midpoint of the range.
    double typical() const { return std::sqrt(low_m2 * high_m2); }
};

inline constexpr RcsEntry kRcsCatalog[] = {
    {"insect", 1e-6, 1e-5},
    {"bird", 0.01, 0.01},
    {"human", 1.0, 1.0},
    {"car", 10.0, 100.0},
    {"large_truck", 100.0, 200.0},
    {"commercial_aircraft", 30.0, 1000.0},
    {"cargo_aircraft", 100.0, 100.0},
    {"small_combat_aircraft", 2.0, 3.0},
    {"large_combat_aircraft", 5.0, 6.0},
    {"large_ship", 1e5, 1e6},
};

/// Standing human.
inline constexpr double kDefaultRcsM2 = 1.0;

inline std::optional<double> rcs_for(std::string_view object) {
    for (const auto& e : kRcsCatalog)
        if (e.name == object) return e.typical();
    return std::nullopt;
}

struct TargetSpec {
    Point position;
    double rcs_m2 = kDefaultRcsM2;
    /// Reflection amplitude; by default sqrt(rcs) with zero phase. Round-trip
    /// path loss is carried by the DL and UL target channels, not here.
    Complex reflection_amplitude{1.0, 0.0};
    bool operator==(const TargetSpec&) const = default;
};

struct SystemGeometry {
    std::vector<Point> dl_ap_positions;
    std::vector<Point> ul_ap_positions;
    std::vector<Point> user_positions;
    std::vector<TargetSpec> targets;
    SystemConfig config;
    bool operator==(const SystemGeometry&) const = default;
};

inline void SystemConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("SystemConfig: " + what); };
    if (M < 1) fail("M must be >= 1");
    if (L < 1) fail("L must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0)) fail("rho must lie in [0, 1]");
    if (!(area_side_m > 0.0)) fail("area_side_m must be > 0");
    if (!(bandwidth_hz > 0.0)) fail("bandwidth_hz must be > 0");
    if (!(fc_hz > 0.0)) fail("fc_hz must be > 0");
    if (!(shadowing_std_db >= 0.0)) fail("shadowing_std_db must be >= 0");
    for (double r : target_rcs_m2)
        if (!(r > 0.0)) fail("target RCS values must be > 0");
}

/// Minimum link distance used by the path-loss model, metres.
inline constexpr double kMinDistanceM = 10.0;

/// Large-scale gain of the 3GPP UMi NLOS street-canyon model.
///
/// PL_dB = 36.7 log10(d) + 22.7 + 26 log10(fc / 1 GHz), with d clamped to
/// kMinDistanceM. Returns the linear power gain 10^(-PL_dB / 10).
inline double pathloss_linear(double distance_m, double fc_hz) {
    if (!(distance_m >= 0.0)) throw std::invalid_argument("pathloss_linear: distance must be >= 0");
    if (!(fc_hz > 0.0)) throw std::invalid_argument("pathloss_linear: fc_hz must be > 0");
    const double d = std::max(distance_m, kMinDistanceM);
    const double pl_db = 36.7 * std::log10(d) + 22.7 + 26.0 * std::log10(fc_hz / 1e9);
    return std::pow(10.0, -pl_db / 10.0);
}

/// Thermal noise power N0 + 10 log10(B) + Nf, in dBm.
inline double noise_power_dbm(const SystemConfig& cfg) {
    return cfg.noise_psd_dbm_hz + 10.0 * std::log10(cfg.bandwidth_hz) + cfg.noise_figure_db;
}

inline double noise_power_watts(const SystemConfig& cfg) {
    return std::pow(10.0, (noise_power_dbm(cfg) - 30.0) / 10.0);
}

/// Cell-centre positions of `count` APs on a row-major grid over the square.
///
/// The grid has ceil(sqrt(count)) columns; the last row is padded (left
/// partially empty) when count is not a multiple of the column count.
/// `offset` shifts every point by that fraction of a cell in x and y.
inline std::vector<Point> grid_positions(std::size_t count, double side, double offset = 0.0) {
    std::vector<Point> out;
    if (count == 0) return out;
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
    const std::size_t rows = (count + cols - 1) / cols;
    const double w = side / static_cast<double>(cols);
    const double h = side / static_cast<double>(rows);
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = i / cols;
        const std::size_t c = i % cols;
        out.push_back({(static_cast<double>(c) + 0.5 + offset) * w, (static_cast<double>(r) + 0.5 + offset) * h});
    }
    return out;
}

/// Places APs on deterministic grids and users/targets uniformly at random.
///
/// UL APs use the same grid rule shifted by a quarter cell so that they never
/// sit on top of a DL AP when M == N.
inline SystemGeometry place_entities(const SystemConfig& cfg) {
    cfg.validate();
    SystemGeometry geo;
    geo.config = cfg;
    geo.dl_ap_positions = grid_positions(cfg.M, cfg.area_side_m);
    geo.ul_ap_positions = grid_positions(cfg.N, cfg.area_side_m, 0.25);

    std::uniform_real_distribution<double> coord(0.0, cfg.area_side_m);
    Xoshiro256 user_rng(derive_seed(cfg.seed, StreamKind::placement, 0));
    geo.user_positions.reserve(cfg.K);
    for (std::size_t k = 0; k < cfg.K; ++k) {
        const double x = coord(user_rng);
        const double y = coord(user_rng);
        geo.user_positions.push_back({x, y});
    }
    Xoshiro256 target_rng(derive_seed(cfg.seed, StreamKind::placement, 1));
    geo.targets.reserve(cfg.T);
    for (std::size_t t = 0; t < cfg.T; ++t) {
        TargetSpec tgt;
        const double x = coord(target_rng);
        const double y = coord(target_rng);
        tgt.position = {x, y};
        tgt.rcs_m2 = t < cfg.target_rcs_m2.size() ? cfg.target_rcs_m2[t] : kDefaultRcsM2;
        tgt.reflection_amplitude = {std::sqrt(tgt.rcs_m2), 0.0};
        geo.targets.push_back(tgt);
    }
    return geo;
}

/// Bearing of `to` seen from an AP whose ULA lies along the x axis, in
/// [-pi/2, pi/2]. Zero is broadside (+y or -y); the front/back ambiguity of a
/// linear array is folded.
inline double ula_bearing(const Point& from, const Point& to) {
    const double d = distance(from, to);
    if (d == 0.0) return 0.0;
    return std::asin(std::clamp((to.x - from.x) / d, -1.0, 1.0));
}

// ---------------------------------------------------------------------------
// Configuration file support. Keys mirror the SystemConfig field names.

inline const std::vector<std::string>& system_config_keys() {
    static const std::vector<std::string> keys = {
        "M",  "N", "K", "T", "L", "area_side_m", "fc_hz", "bandwidth_hz", "noise_psd_dbm_hz", "noise_figure_db",
        "rho", "p_max_dbm", "seed", "shadowing_std_db", "target_rcs_m2"};
    return keys;
}

inline void to_json(nlohmann::json& j, const SystemConfig& c) {
    j = nlohmann::json{{"M", c.M},
                       {"N", c.N},
                       {"K", c.K},
                       {"T", c.T},
                       {"L", c.L},
                       {"area_side_m", c.area_side_m},
                       {"fc_hz", c.fc_hz},
                       {"bandwidth_hz", c.bandwidth_hz},
                       {"noise_psd_dbm_hz", c.noise_psd_dbm_hz},
                       {"noise_figure_db", c.noise_figure_db},
                       {"rho", c.rho},
                       {"p_max_dbm", c.p_max_dbm},
                       {"seed", c.seed},
                       {"shadowing_std_db", c.shadowing_std_db},
                       {"target_rcs_m2", c.target_rcs_m2}};
}

/// Reads the recognised keys of `j` over the defaults in `base`. Unknown keys
/// are ignored; callers that need a strict key set check it themselves.
/// RCS overrides may be numbers or catalog names ("car", "human", ...).
inline SystemConfig system_config_from_json(const nlohmann::json& j, SystemConfig base = {}) {
    if (!j.is_object()) throw std::invalid_argument("configuration must be a JSON object");
    auto read = [&](const char* key, auto& field) {
        if (auto it = j.find(key); it != j.end()) {
            try {
                it->get_to(field);
            } catch (const nlohmann::json::exception& e) {
                throw std::invalid_argument(std::string("configuration key '") + key + "': " + e.what());
            }
        }
    };
    read("M", base.M);
    read("N", base.N);
    read("K", base.K);
    read("T", base.T);
    read("L", base.L);
    read("area_side_m", base.area_side_m);
    read("fc_hz", base.fc_hz);
    read("bandwidth_hz", base.bandwidth_hz);
    read("noise_psd_dbm_hz", base.noise_psd_dbm_hz);
    read("noise_figure_db", base.noise_figure_db);
    read("rho", base.rho);
    read("p_max_dbm", base.p_max_dbm);
    read("seed", base.seed);
    read("shadowing_std_db", base.shadowing_std_db);
    if (auto it = j.find("target_rcs_m2"); it != j.end()) {
        if (!it->is_array()) throw std::invalid_argument("configuration key 'target_rcs_m2' must be an array");
        base.target_rcs_m2.clear();
        for (const auto& v : *it) {
            if (v.is_number()) {
                base.target_rcs_m2.push_back(v.get<double>());
            } else if (v.is_string()) {
                auto r = rcs_for(v.get<std::string>());
                if (!r) throw std::invalid_argument("unknown RCS object '" + v.get<std::string>() + "'");
                base.target_rcs_m2.push_back(*r);
            } else {
                throw std::invalid_argument("target_rcs_m2 entries must be numbers or object names");
            }
        }
    }
    base.validate();
    return base;
}

} // namespace cfisac
