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
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfisac/beamforming.hpp"
#include "cfisac/channel.hpp"
#include "cfisac/common.hpp"
#include "cfisac/link_performance.hpp"
#include "cfisac/optimizer.hpp"
#include "cfisac/parallel.hpp"
#include "cfisac/random.hpp"
#include "cfisac/results.hpp"
#include "cfisac/scenario.hpp"
#include "cfisac/sensing_metrics.hpp"

namespace cfisac {

struct SweepSpec {
    std::string parameter;       // empty: the experiment's default sweep
    std::vector<double> values;
};

/// One named experiment over a base configuration.
struct ExperimentSpec {
    std::string name;
    SystemConfig base_config;
    SweepSpec sweep;
    std::size_t topologies = 20;
    std::size_t trials = 20000;
    std::string output_path;
    unsigned threads = 1;  // not part of the result; any value gives the same tables
    nlohmann::json options = nlohmann::json::object();
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"hardening",           "cf_vs_colocated", "perf_sweep",
                                                   "opt_sweep",           "beampattern_heatmap",
                                                   "cf_colocated_se",     "beampattern_compare",
                                                   "secure_sweep",        "secure_beampattern"};
    return names;
}

namespace detail {

inline nlohmann::json default_options(const std::string& name) {
    using nlohmann::json;
    if (name == "hardening") return json::object();
    if (name == "cf_vs_colocated") return {{"total_antennas", 100}, {"power_normalization", "statistical"}};
    if (name == "cf_colocated_se")
        return {{"total_antennas", 64}, {"power_normalization", "statistical"}, {"optimize", true}, {"gamma_th_dbm", 10.0}};
    if (name == "perf_sweep")
        return {{"ap_counts", {4, 9, 16}},
                {"power_normalization", "statistical"},
                {"monte_carlo", true},
                {"simulate_dli", true},
                {"per_topology", false}};
    if (name == "opt_sweep") return {{"gamma_th_dbm", 10.0}};
    if (name == "secure_sweep") return {{"gamma_th_dbm", 10.0}, {"delta_max_bps_hz", 0.5}, {"user_counts", {2, 4, 6}}};
    if (name == "beampattern_heatmap")
        return {{"gamma_th_dbm", 10.0},
                {"ap_angle_sets_deg", {{-60, 20, 40}, {25, -70, -10}, {25, -45, 75}, {-20, 30, 60}}},
                {"grid_points", 361}};
    if (name == "beampattern_compare")
        return {{"gamma_th_dbm", 10.0},
                {"cf_angle_sets_deg", {{-60, 20, 40}, {45, -50, -10}}},
                {"cf_antennas", 16},
                {"colocated_angles_deg", {-50, 10, 40}},
                {"colocated_antennas", 32},
                {"grid_points", 361}};
    if (name == "secure_beampattern")
        return {{"gamma_th_dbm", 10.0}, {"delta_max_bps_hz", 0.5}, {"grid_points", 361}};
    throw std::invalid_argument("unknown experiment '" + name + "'");
}

inline SweepSpec default_sweep(const std::string& name, const SystemConfig& c) {
    if (name == "hardening") return {"L", {1, 10, 100}};
    if (name == "cf_vs_colocated") return {"K", {static_cast<double>(c.K)}};
    if (name == "cf_colocated_se") return {"M", {1, 4, 16, 64}};
    if (name == "perf_sweep") return {"L", {2, 4, 8, 12, 16, 20}};
    if (name == "opt_sweep" || name == "secure_sweep") return {"M", {4, 9, 16}};
    return {};
}

inline bool is_profile_experiment(const std::string& name) {
    return name == "beampattern_heatmap" || name == "beampattern_compare" || name == "secure_beampattern";
}

inline bool is_monte_carlo_experiment(const ExperimentSpec& s) {
    if (s.name == "perf_sweep") return s.options.value("monte_carlo", true);
    return s.name == "hardening" || s.name == "cf_vs_colocated" || s.name == "cf_colocated_se";
}

/// Configuration keys a sweep may vary.
inline bool is_config_sweep_key(const std::string& k) {
    return k != "seed" && k != "target_rcs_m2" &&
           std::find(system_config_keys().begin(), system_config_keys().end(), k) != system_config_keys().end();
}

/// Applies one sweep value; "M" moves N along with it so DL and UL AP counts
/// stay paired.
inline void apply_sweep_value(const std::string& param, double value, SystemConfig& cfg, nlohmann::json& options) {
    if (options.contains(param) && options[param].is_number()) {
        options[param] = value;
        return;
    }
    if (!is_config_sweep_key(param)) throw std::invalid_argument("sweep parameter '" + param + "' is not sweepable here");
    nlohmann::json j;
    to_json(j, cfg);
    static const std::set<std::string> integral = {"M", "N", "K", "T", "L"};
    if (integral.count(param)) {
        if (!(value >= 0.0) || value != std::floor(value))
            throw std::invalid_argument("sweep value " + format_real(value) + " is not a count for '" + param + "'");
        j[param] = static_cast<std::size_t>(value);
        if (param == "M") j["N"] = static_cast<std::size_t>(value);
    } else {
        j[param] = value;
    }
    cfg = system_config_from_json(j, cfg);
}

inline double option_real(const nlohmann::json& o, const char* key) {
    const auto& v = o.at(key);
    if (!v.is_number()) throw std::invalid_argument(std::string("option '") + key + "' must be a number");
    return v.get<double>();
}

inline std::size_t option_count(const nlohmann::json& o, const char* key) {
    const auto& v = o.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1)
        throw std::invalid_argument(std::string("option '") + key + "' must be a positive integer");
    return v.get<std::size_t>();
}

inline std::vector<std::size_t> option_counts(const nlohmann::json& o, const char* key) {
    const auto& v = o.at(key);
    if (!v.is_array() || v.empty()) throw std::invalid_argument(std::string("option '") + key + "' must be a non-empty array");
    std::vector<std::size_t> out;
    for (const auto& x : v) {
        if (!x.is_number_integer() || x.get<long long>() < 1)
            throw std::invalid_argument(std::string("option '") + key + "' entries must be positive integers");
        out.push_back(x.get<std::size_t>());
    }
    return out;
}

inline std::vector<double> option_angles_rad(const nlohmann::json& v, const char* key) {
    if (!v.is_array() || v.empty()) throw std::invalid_argument(std::string("option '") + key + "' must list angles");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw std::invalid_argument(std::string("option '") + key + "' angles must be numbers");
        const double d = x.get<double>();
        if (d < -90.0 || d > 90.0) throw std::invalid_argument(std::string("option '") + key + "' angle outside [-90, 90]");
        out.push_back(deg_to_rad(d));
    }
    return out;
}

inline std::vector<std::vector<double>> option_angle_sets(const nlohmann::json& o, const char* key) {
    const auto& v = o.at(key);
    if (!v.is_array() || v.empty()) throw std::invalid_argument(std::string("option '") + key + "' must list angle sets");
    std::vector<std::vector<double>> out;
    for (const auto& s : v) out.push_back(option_angles_rad(s, key));
    for (const auto& s : out)
        if (s.size() != out.front().size())
            throw std::invalid_argument(std::string("option '") + key + "': every AP needs the same number of targets");
    return out;
}

} // namespace detail

/// Fills defaults and checks the spec; throws std::invalid_argument.
inline ExperimentSpec resolve_spec(ExperimentSpec s) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), s.name) == names.end())
        throw std::invalid_argument("unknown experiment '" + s.name + "'");
    s.base_config.validate();
    if (s.topologies < 1) throw std::invalid_argument("topologies must be >= 1");
    if (!s.options.is_object()) throw std::invalid_argument("options must be a JSON object");
    nlohmann::json merged = detail::default_options(s.name);
    for (auto it = s.options.begin(); it != s.options.end(); ++it) {
        if (!merged.contains(it.key()))
            throw std::invalid_argument("experiment '" + s.name + "' has no option '" + it.key() + "'");
        merged[it.key()] = it.value();
    }
    s.options = std::move(merged);
    if (detail::is_monte_carlo_experiment(s) && s.trials < 100)
        throw std::invalid_argument("trials must be >= 100 for Monte-Carlo experiments");
    if (detail::is_profile_experiment(s.name)) {
        if (!s.sweep.parameter.empty() || !s.sweep.values.empty())
            throw std::invalid_argument("experiment '" + s.name + "' does not take a sweep");
    } else {
        if (s.sweep.parameter.empty()) {
            if (!s.sweep.values.empty()) throw std::invalid_argument("sweep values given without a parameter");
            s.sweep = detail::default_sweep(s.name, s.base_config);
        }
        if (s.sweep.values.empty()) throw std::invalid_argument("sweep needs at least one value");
        if (s.name == "hardening" && s.sweep.parameter != "L")
            throw std::invalid_argument("hardening sweeps L only");
        if (s.name == "cf_colocated_se" && s.sweep.parameter != "M")
            throw std::invalid_argument("cf_colocated_se sweeps M only (L follows from total_antennas)");
        // Dry-run every sweep value so bad values fail before any work starts.
        for (double v : s.sweep.values) {
            SystemConfig c = s.base_config;
            nlohmann::json o = s.options;
            detail::apply_sweep_value(s.sweep.parameter, v, c, o);
        }
    }
    if (s.name == "cf_colocated_se") {
        const auto total = detail::option_count(s.options, "total_antennas");
        for (double v : s.sweep.values)
            if (total % static_cast<std::size_t>(v) != 0)
                throw std::invalid_argument("cf_colocated_se: M = " + format_real(v) + " does not divide total_antennas");
    }
    return s;
}

/// Flat spec document: SystemConfig keys plus experiment fields.
inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
    nlohmann::json j;
    to_json(j, s.base_config);
    j["experiment"] = s.name;
    if (!s.sweep.parameter.empty()) j["sweep"] = {{"parameter", s.sweep.parameter}, {"values", s.sweep.values}};
    j["topologies"] = s.topologies;
    j["trials"] = s.trials;
    j["options"] = s.options;
    return j;
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("spec must be a JSON object");
    static const std::set<std::string> extra = {"experiment", "sweep", "topologies", "trials", "output", "options", "threads"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& keys = system_config_keys();
        if (!extra.count(it.key()) && std::find(keys.begin(), keys.end(), it.key()) == keys.end())
            throw std::invalid_argument("unknown spec key '" + it.key() + "'");
    }
    ExperimentSpec s;
    try {
        if (!j.contains("experiment")) throw std::invalid_argument("spec lacks 'experiment'");
        s.name = j.at("experiment").get<std::string>();
        s.base_config = system_config_from_json(j);
        if (j.contains("sweep")) {
            const auto& sw = j.at("sweep");
            s.sweep.parameter = sw.at("parameter").get<std::string>();
            s.sweep.values = sw.at("values").get<std::vector<double>>();
        }
        if (j.contains("topologies")) s.topologies = j.at("topologies").get<std::size_t>();
        if (j.contains("trials")) s.trials = j.at("trials").get<std::size_t>();
        if (j.contains("output")) s.output_path = j.at("output").get<std::string>();
        if (j.contains("threads")) s.threads = j.at("threads").get<unsigned>();
        if (j.contains("options")) s.options = j.at("options");
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed spec: ") + e.what());
    }
    return s;
}

inline ExperimentSpec load_spec(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open spec file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("spec file '" + path + "' is not valid JSON: " + e.what());
    }
    return spec_from_json(j);
}

/// Sum-SE design problem for one geometry and channel draw: bearings from the
/// AP positions, p_max and noise from the configuration.
inline DesignProblem make_design_problem(const SystemGeometry& geo, ChannelSet channels, double gamma_th_watts,
                                         std::optional<double> delta_max = std::nullopt) {
    DesignProblem pb;
    pb.target_angles.resize(geo.dl_ap_positions.size());
    for (std::size_t m = 0; m < geo.dl_ap_positions.size(); ++m)
        for (const auto& t : geo.targets) pb.target_angles[m].push_back(ula_bearing(geo.dl_ap_positions[m], t.position));
    pb.channels = std::move(channels);
    pb.gamma_th_watts = gamma_th_watts;
    pb.p_max_watts = dbm_to_watts(geo.config.p_max_dbm);
    pb.noise_watts = noise_power_watts(geo.config);
    pb.delta_max_bps_hz = delta_max;
    return pb;
}

/// Configuration of topology `t`: the placement seed is derived from the
/// master seed and the topology index only, so sweep points share user and
/// target drops.
inline SystemConfig topology_config(SystemConfig cfg, std::uint64_t master, std::size_t t) {
    cfg.seed = derive_seed(master, StreamKind::topology, t);
    return cfg;
}

/// Seed of the single channel draw an optimizer instance sees.
inline std::uint64_t instance_channel_seed(std::uint64_t master, std::size_t t) {
    return derive_seed(master, StreamKind::trial, t, 1);
}

/// Seed of the Monte-Carlo trials of topology `t`.
inline std::uint64_t monte_carlo_seed(std::uint64_t master, std::size_t t) {
    return derive_seed(master, StreamKind::trial, t, 0);
}

inline std::vector<double> power_scaling(const std::string& rule, const LargeScaleGains& g, std::size_t L, double p_watts) {
    if (rule == "statistical") return statistical_power_scaling(g, L, p_watts);
    if (rule == "none") return detail::unit_scaling(g.M());
    throw std::invalid_argument("power_normalization must be 'statistical' or 'none'");
}

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

inline double max_leakage(const ChannelSet& ch, const PrecoderSet& p, double sigma2) {
    if (ch.T() == 0) return 0.0;
    double m = 0.0;
    for (double v : leakage_se(ch, p, sigma2).max_per_target) m = std::max(m, v);
    return m;
}

inline ResultTable table_with(std::initializer_list<Column> cols) {
    ResultTable t;
    t.columns.assign(cols.begin(), cols.end());
    return t;
}

/// Mean of the finite entries; NaN when there are none.
inline double finite_mean(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    return n ? s / static_cast<double>(n) : kNaN;
}

// ---------------------------------------------------------------------------

inline ResultTable run_hardening(const ExperimentSpec& s) {
    auto t = table_with({{"L", ColumnType::integer},
                         {"trials", ColumnType::integer},
                         {"mean_cv", ColumnType::real},
                         {"var_cv", ColumnType::real},
                         {"var_cv_times_L", ColumnType::real},
                         {"fp_mean_re", ColumnType::real},
                         {"fp_mean_im", ColumnType::real},
                         {"fp_mean_abs2", ColumnType::real},
                         {"fp_mean_abs2_times_L", ColumnType::real}});
    const auto& vals = s.sweep.values;
    std::vector<std::pair<HardeningStats, FavorablePropagationStats>> out(vals.size());
    parallel_for(vals.size(), s.threads, [&](std::size_t i) {
        const auto L = static_cast<std::size_t>(vals[i]);
        const auto seed = derive_seed(s.base_config.seed, StreamKind::topology, i);
        out[i] = {hardening_stats(L, 1.0, s.trials, seed), favorable_propagation_stats(L, 1.0, 1.0, s.trials, seed)};
    });
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const auto& [h, f] = out[i];
        const double L = static_cast<double>(h.n_antennas);
        t.add_row({as_int(h.n_antennas), as_int(h.trials), h.mean_cv, h.var_cv, h.var_cv * L, f.mean.real(), f.mean.imag(),
                   f.mean_abs2, f.mean_abs2 * L});
    }
    return t;
}

// ---------------------------------------------------------------------------

struct UatfSummary {
    double sum_closed = kNaN, sum_uatf = kNaN, sum_ergodic = kNaN, sum_ergodic_se = kNaN, mean_user_uatf = kNaN, min_user_uatf = kNaN;
};

inline UatfSummary uatf_summary(const SystemGeometry& geo, const std::string& norm, const MonteCarloOptions& opt) {
    const auto& c = geo.config;
    const auto gains = large_scale_gains(geo);
    const auto eta = power_scaling(norm, gains, c.L, dbm_to_watts(c.p_max_dbm));
    const double sigma2 = noise_power_watts(c);
    const auto rep = uatf_se({gains, c.L}, scaled_mrt_rule(eta), sigma2, opt);
    UatfSummary u;
    u.sum_closed = 0.0;
    for (double v : comm_sinr_closed_form(gains.h, gains.g_dl, c.L, sigma2, eta)) u.sum_closed += comm_se(v);
    u.sum_uatf = rep.sum_uatf();
    u.sum_ergodic = rep.sum_ergodic();
    double v = 0.0;
    for (const auto& e : rep.se_ergodic) v += e.std_error * e.std_error;
    u.sum_ergodic_se = std::sqrt(v);
    u.mean_user_uatf = rep.se_uatf.empty() ? kNaN : u.sum_uatf / static_cast<double>(rep.se_uatf.size());
    u.min_user_uatf = rep.se_uatf.empty() ? kNaN : *std::min_element(rep.se_uatf.begin(), rep.se_uatf.end());
    return u;
}

inline ResultTable run_cf_vs_colocated(const ExperimentSpec& s) {
    const auto& param = s.sweep.parameter;
    auto t = table_with({{"sweep_value", ColumnType::real},
                         {"architecture", ColumnType::text},
                         {"M", ColumnType::integer},
                         {"L", ColumnType::integer},
                         {"topology", ColumnType::integer},
                         {"sum_se_uatf", ColumnType::real},
                         {"sum_se_ergodic", ColumnType::real},
                         {"sum_se_ergodic_stderr", ColumnType::real},
                         {"mean_user_se_uatf", ColumnType::real},
                         {"min_user_se_uatf", ColumnType::real}});
    const auto total = option_count(s.options, "total_antennas");
    const std::string norm = s.options.at("power_normalization").get<std::string>();
    const std::size_t P = s.sweep.values.size(), A = 2, Tn = s.topologies;
    const std::uint64_t master = s.base_config.seed;
    std::vector<UatfSummary> out(P * A * Tn);
    parallel_for(out.size(), s.threads, [&](std::size_t idx) {
        const std::size_t topo = idx % Tn, arch = (idx / Tn) % A, p = idx / (Tn * A);
        SystemConfig c = s.base_config;
        nlohmann::json o = s.options;
        apply_sweep_value(param, s.sweep.values[p], c, o);
        c.M = c.N = arch == 0 ? total : 1;
        c.L = arch == 0 ? 1 : total;
        const auto geo = place_entities(topology_config(c, master, topo));
        MonteCarloOptions mc;
        mc.trials = s.trials;
        mc.seed = monte_carlo_seed(master, topo);
        out[idx] = uatf_summary(geo, norm, mc);
    });
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t arch = 0; arch < A; ++arch) {
            const char* name = arch == 0 ? "cell_free" : "colocated";
            const auto M = as_int(arch == 0 ? total : 1), L = as_int(arch == 0 ? 1 : total);
            std::vector<double> a, b, c2, d, e;
            for (std::size_t topo = 0; topo < Tn; ++topo) {
                const auto& u = out[(p * A + arch) * Tn + topo];
                t.add_row({s.sweep.values[p], std::string(name), M, L, as_int(topo), u.sum_uatf, u.sum_ergodic,
                           u.sum_ergodic_se, u.mean_user_uatf, u.min_user_uatf});
                a.push_back(u.sum_uatf);
                b.push_back(u.sum_ergodic);
                c2.push_back(u.sum_ergodic_se * u.sum_ergodic_se);
                d.push_back(u.mean_user_uatf);
                e.push_back(u.min_user_uatf);
            }
            const double n = static_cast<double>(Tn);
            t.add_row({s.sweep.values[p], std::string(name), M, L, std::int64_t{-1}, finite_mean(a), finite_mean(b),
                       std::sqrt(finite_mean(c2) * n) / n, finite_mean(d), finite_mean(e)});
        }
    return t;
}

// ---------------------------------------------------------------------------

struct InstanceResult {
    bool feasible = false;
    double sum_se = kNaN, baseline_sum_se = kNaN;
    std::int64_t iterations = 0, converged = 0;
};

inline InstanceResult optimize_instance(const SystemGeometry& geo, std::uint64_t channel_seed, double gamma_w) {
    const auto ch = sample_channels(geo, channel_seed, ChannelKinds{true, true, false, false});
    InstanceResult r;
    try {
        const auto rep = maximize_sum_se(make_design_problem(geo, ch, gamma_w));
        r.feasible = true;
        r.sum_se = rep.sum_se();
        r.baseline_sum_se = rep.baseline_sum_se;
        r.iterations = as_int(rep.iterations);
        r.converged = rep.converged ? 1 : 0;
    } catch (const InfeasibleProblem&) {
        r.baseline_sum_se = instantaneous_sum_se(ch, mrt_precoders(ch), noise_power_watts(geo.config));
    }
    return r;
}

inline ResultTable run_cf_colocated_se(const ExperimentSpec& s) {
    auto t = table_with({{"M", ColumnType::integer},
                         {"L", ColumnType::integer},
                         {"topology", ColumnType::integer},
                         {"sum_se_closed", ColumnType::real},
                         {"sum_se_uatf", ColumnType::real},
                         {"sum_se_ergodic", ColumnType::real},
                         {"sum_se_ergodic_stderr", ColumnType::real},
                         {"opt_sum_se", ColumnType::real},
                         {"opt_feasible", ColumnType::integer}});
    const auto total = option_count(s.options, "total_antennas");
    const std::string norm = s.options.at("power_normalization").get<std::string>();
    const bool optimize = s.options.at("optimize").get<bool>();
    const std::size_t P = s.sweep.values.size(), Tn = s.topologies;
    const std::uint64_t master = s.base_config.seed;
    std::vector<std::pair<UatfSummary, InstanceResult>> out(P * Tn);
    parallel_for(out.size(), s.threads, [&](std::size_t idx) {
        const std::size_t topo = idx % Tn, p = idx / Tn;
        SystemConfig c = s.base_config;
        nlohmann::json o = s.options;
        apply_sweep_value("M", s.sweep.values[p], c, o);
        c.L = total / c.M;
        const auto geo = place_entities(topology_config(c, master, topo));
        MonteCarloOptions mc;
        mc.trials = s.trials;
        mc.seed = monte_carlo_seed(master, topo);
        out[idx].first = uatf_summary(geo, norm, mc);
        if (optimize)
            out[idx].second = optimize_instance(geo, instance_channel_seed(master, topo),
                                                dbm_to_watts(option_real(o, "gamma_th_dbm")));
    });
    for (std::size_t p = 0; p < P; ++p) {
        const auto M = static_cast<std::size_t>(s.sweep.values[p]);
        std::vector<double> a, b, c2, d, cl;
        std::int64_t feasible = 0;
        for (std::size_t topo = 0; topo < Tn; ++topo) {
            const auto& [u, r] = out[p * Tn + topo];
            cl.push_back(u.sum_closed);
            t.add_row({as_int(M), as_int(total / M), as_int(topo), u.sum_closed, u.sum_uatf, u.sum_ergodic, u.sum_ergodic_se, r.sum_se,
                       std::int64_t{r.feasible ? 1 : 0}});
            a.push_back(u.sum_uatf);
            b.push_back(u.sum_ergodic);
            c2.push_back(u.sum_ergodic_se * u.sum_ergodic_se);
            d.push_back(r.sum_se);
            feasible += r.feasible ? 1 : 0;
        }
        const double n = static_cast<double>(Tn);
        t.add_row({as_int(M), as_int(total / M), std::int64_t{-1}, finite_mean(cl), finite_mean(a), finite_mean(b),
                   std::sqrt(finite_mean(c2) * n) / n, finite_mean(d), feasible});
    }
    if (optimize) {
        bool any = false;
        for (const auto& o : out) any = any || o.second.feasible;
        t.metadata["summary"]["all_infeasible"] = !any;
    }
    return t;
}

// ---------------------------------------------------------------------------

struct PerfSummary {
    double comm_closed = 0.0, comm_mc = 0.0, comm_var = 0.0, comm_max_z = 0.0;
    double sens_closed = 0.0, sens_mc = 0.0, sens_var = 0.0, sens_max_z = 0.0;
    std::int64_t comm_over = 0, sens_over = 0, comm_n = 0, sens_n = 0;
};

inline PerfSummary summarize_perf(const PerfReport& r, bool have_mc) {
    PerfSummary p;
    auto z = [](double closed, const Estimate& e) {
        return e.std_error > 0.0 ? std::abs(closed - e.value) / e.std_error
                                 : (closed == e.value ? 0.0 : std::numeric_limits<double>::infinity());
    };
    for (std::size_t k = 0; k < r.comm_se_closed.size(); ++k) {
        p.comm_closed += r.comm_se_closed[k];
        ++p.comm_n;
        if (!have_mc) continue;
        const auto& e = r.comm_se_mc[k];
        p.comm_mc += e.value;
        p.comm_var += e.std_error * e.std_error;
        const double zz = z(r.comm_se_closed[k], e);
        p.comm_max_z = std::max(p.comm_max_z, zz);
        p.comm_over += zz > 3.0 ? 1 : 0;
    }
    for (Eigen::Index n = 0; n < r.sens_se_closed.rows(); ++n)
        for (Eigen::Index tt = 0; tt < r.sens_se_closed.cols(); ++tt) {
            const double c = r.sens_se_closed(n, tt);
            p.sens_closed += c;
            ++p.sens_n;
            if (!have_mc) continue;
            const auto& e = r.sens_se_mc(static_cast<std::size_t>(n), static_cast<std::size_t>(tt));
            p.sens_mc += e.value;
            p.sens_var += e.std_error * e.std_error;
            const double zz = z(c, e);
            p.sens_max_z = std::max(p.sens_max_z, zz);
            p.sens_over += zz > 3.0 ? 1 : 0;
        }
    if (!have_mc) {
        p.comm_mc = p.sens_mc = p.comm_var = p.sens_var = p.comm_max_z = p.sens_max_z = kNaN;
    }
    return p;
}

inline PerfSummary perf_instance(const SystemGeometry& geo, const std::string& norm, bool mc_on, bool dli,
                                 std::size_t trials, std::uint64_t seed) {
    const auto& c = geo.config;
    const auto gains = large_scale_gains(geo);
    const auto eta = power_scaling(norm, gains, c.L, dbm_to_watts(c.p_max_dbm));
    std::vector<Complex> alpha;
    for (const auto& tg : geo.targets) alpha.push_back(tg.reflection_amplitude);
    const double sigma2 = noise_power_watts(c);
    if (!mc_on) {
        PerfReport r;
        for (double v : comm_sinr_closed_form(gains.h, gains.g_dl, c.L, sigma2, eta)) r.comm_se_closed.push_back(comm_se(v));
        if (c.T > 0)
            r.sens_se_closed = sensing_sinr_closed_form(gains.g_ul, gains.g_dl, gains.h, alpha, c.L, sigma2, eta)
                                   .unaryExpr([](double v) { return std::log2(1.0 + v); });
        return summarize_perf(r, false);
    }
    MonteCarloOptions opt;
    opt.trials = trials;
    opt.seed = seed;
    opt.simulate_dli = dli;
    return summarize_perf(evaluate_performance(gains, c.L, alpha, sigma2, eta, opt), true);
}

inline ResultTable run_perf_sweep(const ExperimentSpec& s) {
    const auto& param = s.sweep.parameter;
    auto t = table_with({{"sweep_value", ColumnType::real},
                         {"M", ColumnType::integer},
                         {"N", ColumnType::integer},
                         {"L", ColumnType::integer},
                         {"topology", ColumnType::integer},
                         {"metric", ColumnType::text},
                         {"closed", ColumnType::real},
                         {"mc", ColumnType::real},
                         {"mc_stderr", ColumnType::real},
                         {"max_abs_z", ColumnType::real},
                         {"over_3se", ColumnType::integer},
                         {"entities", ColumnType::integer}});
    const auto aps = option_counts(s.options, "ap_counts");
    const std::string norm = s.options.at("power_normalization").get<std::string>();
    const bool mc_on = s.options.at("monte_carlo").get<bool>();
    const bool dli = s.options.at("simulate_dli").get<bool>();
    const bool per_topo = s.options.at("per_topology").get<bool>();
    const std::size_t P = s.sweep.values.size(), A = aps.size(), Tn = s.topologies;
    const std::uint64_t master = s.base_config.seed;
    auto config_at = [&](std::size_t p, std::size_t a) {
        SystemConfig c = s.base_config;
        c.M = c.N = aps[a];
        nlohmann::json o = s.options;
        apply_sweep_value(param, s.sweep.values[p], c, o);
        return c;
    };
    std::vector<PerfSummary> out(P * A * Tn);
    parallel_for(out.size(), s.threads, [&](std::size_t idx) {
        const std::size_t topo = idx % Tn, a = (idx / Tn) % A, p = idx / (Tn * A);
        const auto geo = place_entities(topology_config(config_at(p, a), master, topo));
        out[idx] = perf_instance(geo, norm, mc_on, dli, s.trials, monte_carlo_seed(master, topo));
    });
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t a = 0; a < A; ++a) {
            const auto c = config_at(p, a);
            for (int metric = 0; metric < 2; ++metric) {
                const bool comm = metric == 0;
                const std::string name = comm ? "comm_sum_se" : "sens_sum_se";
                double closed = 0.0, mc = 0.0, var = 0.0, mz = 0.0;
                std::int64_t over = 0, n = 0;
                for (std::size_t topo = 0; topo < Tn; ++topo) {
                    const auto& r = out[(p * A + a) * Tn + topo];
                    const double rc = comm ? r.comm_closed : r.sens_closed, rm = comm ? r.comm_mc : r.sens_mc;
                    const double rv = comm ? r.comm_var : r.sens_var, rz = comm ? r.comm_max_z : r.sens_max_z;
                    const std::int64_t ro = comm ? r.comm_over : r.sens_over, rn = comm ? r.comm_n : r.sens_n;
                    if (per_topo)
                        t.add_row({s.sweep.values[p], as_int(c.M), as_int(c.N), as_int(c.L), as_int(topo), name, rc, rm,
                                   std::sqrt(rv), rz, ro, rn});
                    closed += rc;
                    mc += rm;
                    var += rv;
                    mz = std::isnan(rz) ? rz : std::max(mz, rz);
                    over += ro;
                    n += rn;
                }
                const double dn = static_cast<double>(Tn);
                t.add_row({s.sweep.values[p], as_int(c.M), as_int(c.N), as_int(c.L), std::int64_t{-1}, name, closed / dn,
                           mc / dn, std::sqrt(var) / dn, mz, over, n});
            }
        }
    return t;
}

// ---------------------------------------------------------------------------

inline ResultTable run_opt_sweep(const ExperimentSpec& s) {
    const auto& param = s.sweep.parameter;
    auto t = table_with({{"sweep_value", ColumnType::real},
                         {"M", ColumnType::integer},
                         {"K", ColumnType::integer},
                         {"T", ColumnType::integer},
                         {"L", ColumnType::integer},
                         {"topology", ColumnType::integer},
                         {"sum_se", ColumnType::real},
                         {"baseline_sum_se", ColumnType::real},
                         {"iterations", ColumnType::integer},
                         {"converged", ColumnType::integer},
                         {"feasible", ColumnType::integer}});
    const std::size_t P = s.sweep.values.size(), Tn = s.topologies;
    const std::uint64_t master = s.base_config.seed;
    std::vector<InstanceResult> out(P * Tn);
    std::vector<SystemConfig> cfgs(P);
    std::vector<double> gammas(P);
    for (std::size_t p = 0; p < P; ++p) {
        cfgs[p] = s.base_config;
        nlohmann::json o = s.options;
        apply_sweep_value(param, s.sweep.values[p], cfgs[p], o);
        gammas[p] = dbm_to_watts(option_real(o, "gamma_th_dbm"));
    }
    parallel_for(out.size(), s.threads, [&](std::size_t idx) {
        const std::size_t topo = idx % Tn, p = idx / Tn;
        const auto geo = place_entities(topology_config(cfgs[p], master, topo));
        out[idx] = optimize_instance(geo, instance_channel_seed(master, topo), gammas[p]);
    });
    bool any = false;
    for (std::size_t p = 0; p < P; ++p) {
        const auto& c = cfgs[p];
        std::vector<double> se, base;
        std::int64_t feasible = 0, iters = 0, conv = 0;
        for (std::size_t topo = 0; topo < Tn; ++topo) {
            const auto& r = out[p * Tn + topo];
            t.add_row({s.sweep.values[p], as_int(c.M), as_int(c.K), as_int(c.T), as_int(c.L), as_int(topo), r.sum_se,
                       r.baseline_sum_se, r.iterations, r.converged, std::int64_t{r.feasible ? 1 : 0}});
            se.push_back(r.sum_se);
            base.push_back(r.feasible ? r.baseline_sum_se : kNaN);
            feasible += r.feasible ? 1 : 0;
            iters += r.iterations;
            conv += r.converged;
        }
        any = any || feasible > 0;
        t.add_row({s.sweep.values[p], as_int(c.M), as_int(c.K), as_int(c.T), as_int(c.L), std::int64_t{-1},
                   finite_mean(se), finite_mean(base), iters, conv, feasible});
    }
    t.metadata["summary"]["all_infeasible"] = !any;
    return t;
}

// ---------------------------------------------------------------------------

struct SecureResult {
    bool feasible = false;
    double secure = kNaN, secure_leak = kNaN, beam = kNaN, beam_leak = kNaN, free = kNaN;
};

inline ResultTable run_secure_sweep(const ExperimentSpec& s) {
    const auto& param = s.sweep.parameter;
    auto t = table_with({{"sweep_value", ColumnType::real},
                         {"M", ColumnType::integer},
                         {"K", ColumnType::integer},
                         {"topology", ColumnType::integer},
                         {"sum_se_secure", ColumnType::real},
                         {"max_leakage_se_secure", ColumnType::real},
                         {"sum_se_beampattern", ColumnType::real},
                         {"max_leakage_se_beampattern", ColumnType::real},
                         {"sum_se_unconstrained", ColumnType::real},
                         {"feasible", ColumnType::integer}});
    const auto users = option_counts(s.options, "user_counts");
    const std::size_t P = s.sweep.values.size(), U = users.size(), Tn = s.topologies;
    const std::uint64_t master = s.base_config.seed;
    auto point = [&](std::size_t p, std::size_t u) {
        SystemConfig c = s.base_config;
        c.K = users[u];
        nlohmann::json o = s.options;
        apply_sweep_value(param, s.sweep.values[p], c, o);
        return std::pair{c, o};
    };
    std::vector<SecureResult> out(P * U * Tn);
    parallel_for(out.size(), s.threads, [&](std::size_t idx) {
        const std::size_t topo = idx % Tn, u = (idx / Tn) % U, p = idx / (Tn * U);
        const auto [c, o] = point(p, u);
        const auto geo = place_entities(topology_config(c, master, topo));
        const auto ch = sample_channels(geo, instance_channel_seed(master, topo), ChannelKinds{true, true, false, false});
        const double sigma2 = noise_power_watts(c);
        SecureResult r;
        try {
            const auto chain = solve_relaxation_chain(make_design_problem(
                geo, ch, dbm_to_watts(option_real(o, "gamma_th_dbm")), option_real(o, "delta_max_bps_hz")));
            r.feasible = true;
            r.secure = chain.secure.sum_se();
            r.secure_leak = max_leakage(ch, chain.secure.precoders, sigma2);
            r.beam = chain.beampattern.sum_se();
            r.beam_leak = max_leakage(ch, chain.beampattern.precoders, sigma2);
            r.free = chain.unconstrained.sum_se();
        } catch (const InfeasibleProblem&) {
        }
        out[idx] = r;
    });
    bool any = false;
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t u = 0; u < U; ++u) {
            const auto c = point(p, u).first;
            std::vector<double> a, b, d, e, f;
            std::int64_t feasible = 0;
            for (std::size_t topo = 0; topo < Tn; ++topo) {
                const auto& r = out[(p * U + u) * Tn + topo];
                t.add_row({s.sweep.values[p], as_int(c.M), as_int(c.K), as_int(topo), r.secure, r.secure_leak, r.beam,
                           r.beam_leak, r.free, std::int64_t{r.feasible ? 1 : 0}});
                a.push_back(r.secure);
                b.push_back(r.secure_leak);
                d.push_back(r.beam);
                e.push_back(r.beam_leak);
                f.push_back(r.free);
                feasible += r.feasible ? 1 : 0;
            }
            any = any || feasible > 0;
            t.add_row({s.sweep.values[p], as_int(c.M), as_int(c.K), std::int64_t{-1}, finite_mean(a), finite_mean(b),
                       finite_mean(d), finite_mean(e), finite_mean(f), feasible});
        }
    t.metadata["summary"]["all_infeasible"] = !any;
    return t;
}

// ---------------------------------------------------------------------------

inline ResultTable profile_table(bool with_architecture) {
    ResultTable t;
    if (with_architecture) t.columns.push_back({"architecture", ColumnType::text});
    for (Column c : {Column{"ap", ColumnType::integer}, Column{"component", ColumnType::text},
                     Column{"angle_deg", ColumnType::real}, Column{"gain_linear", ColumnType::real},
                     Column{"gain_db", ColumnType::real}, Column{"peak", ColumnType::integer}})
        t.columns.push_back(c);
    return t;
}

/// Appends the sensing-only and total transmit profiles of every AP.
inline void add_profiles(ResultTable& t, const PrecoderSet& p, const std::vector<double>& grid,
                         const std::optional<std::string>& architecture) {
    for (std::size_t m = 0; m < p.M(); ++m) {
        std::vector<CVector> sensing;
        for (std::size_t tt = 0; tt < p.T(); ++tt) sensing.push_back(p.s(m, tt));
        for (int comp = 0; comp < 2; ++comp) {
            const auto prof = comp == 0 ? beampattern_profile(sensing, m, grid) : beampattern_profile(p, m, grid);
            std::vector<bool> peak(grid.size(), false);
            for (auto i : prof.peaks) peak[i] = true;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double g = prof.gains[i];
                std::vector<Cell> row;
                if (architecture) row.emplace_back(*architecture);
                row.emplace_back(as_int(m));
                row.emplace_back(std::string(comp == 0 ? "sensing" : "total"));
                row.emplace_back(rad_to_deg(grid[i]));
                row.emplace_back(g);
                row.emplace_back(g > 0.0 ? linear_to_db(g) : -std::numeric_limits<double>::infinity());
                row.emplace_back(std::int64_t{peak[i] ? 1 : 0});
                t.add_row(std::move(row));
            }
        }
    }
}

/// Solves one instance with externally given bearings (one set per AP).
inline std::optional<SolveReport> solve_with_bearings(const SystemConfig& base, std::size_t antennas,
                                                      const std::vector<std::vector<double>>& bearings, double gamma_w) {
    SystemConfig c = base;
    c.M = c.N = bearings.size();
    c.T = bearings.front().size();
    c.L = antennas;
    const auto geo = place_entities(topology_config(c, base.seed, 0));
    auto pb = make_design_problem(geo, sample_channels(geo, instance_channel_seed(base.seed, 0), ChannelKinds{true, true, false, false}),
                                  gamma_w);
    pb.target_angles = bearings;
    try {
        return maximize_sum_se(pb);
    } catch (const InfeasibleProblem&) {
        return std::nullopt;
    }
}

inline ResultTable run_beampattern_heatmap(const ExperimentSpec& s) {
    auto t = profile_table(false);
    const auto sets = option_angle_sets(s.options, "ap_angle_sets_deg");
    const auto grid = angle_grid(option_count(s.options, "grid_points"));
    const auto rep = solve_with_bearings(s.base_config, s.base_config.L, sets, dbm_to_watts(option_real(s.options, "gamma_th_dbm")));
    if (rep) add_profiles(t, rep->precoders, grid, std::nullopt);
    t.metadata["summary"]["all_infeasible"] = !rep.has_value();
    return t;
}

inline ResultTable run_beampattern_compare(const ExperimentSpec& s) {
    auto t = profile_table(true);
    const auto grid = angle_grid(option_count(s.options, "grid_points"));
    const double gamma = dbm_to_watts(option_real(s.options, "gamma_th_dbm"));
    const auto cf = solve_with_bearings(s.base_config, option_count(s.options, "cf_antennas"),
                                        option_angle_sets(s.options, "cf_angle_sets_deg"), gamma);
    const auto co = solve_with_bearings(s.base_config, option_count(s.options, "colocated_antennas"),
                                        {option_angles_rad(s.options.at("colocated_angles_deg"), "colocated_angles_deg")},
                                        gamma);
    if (cf) add_profiles(t, cf->precoders, grid, std::string("cell_free"));
    if (co) add_profiles(t, co->precoders, grid, std::string("colocated"));
    t.metadata["summary"]["all_infeasible"] = !cf && !co;
    return t;
}

inline ResultTable run_secure_beampattern(const ExperimentSpec& s) {
    auto t = profile_table(false);
    const auto grid = angle_grid(option_count(s.options, "grid_points"));
    const auto geo = place_entities(topology_config(s.base_config, s.base_config.seed, 0));
    const auto ch = sample_channels(geo, instance_channel_seed(s.base_config.seed, 0), ChannelKinds{true, true, false, false});
    const auto pb = make_design_problem(geo, ch, dbm_to_watts(option_real(s.options, "gamma_th_dbm")),
                                        option_real(s.options, "delta_max_bps_hz"));
    try {
        const auto rep = maximize_sum_se_secure(pb);
        add_profiles(t, rep.precoders, grid, std::nullopt);
        nlohmann::json bearings = nlohmann::json::array();
        for (const auto& row : pb.target_angles) {
            nlohmann::json r = nlohmann::json::array();
            for (double a : row) r.push_back(rad_to_deg(a));
            bearings.push_back(r);
        }
        t.metadata["summary"] = {{"all_infeasible", false},
                                 {"target_bearings_deg", bearings},
                                 {"sum_se", rep.sum_se()},
                                 {"max_leakage_se", max_leakage(ch, rep.precoders, pb.noise_watts)}};
    } catch (const InfeasibleProblem&) {
        t.metadata["summary"]["all_infeasible"] = true;
    }
    return t;
}

} // namespace detail

/// Runs the named pipeline. Rows are produced in a fixed index order and every
/// random draw is keyed by (seed, topology, ...), so the table does not depend
/// on spec.threads.
inline ResultTable run_experiment(const ExperimentSpec& spec) {
    const ExperimentSpec s = resolve_spec(spec);
    ResultTable t;
    if (s.name == "hardening") t = detail::run_hardening(s);
    else if (s.name == "cf_vs_colocated") t = detail::run_cf_vs_colocated(s);
    else if (s.name == "cf_colocated_se") t = detail::run_cf_colocated_se(s);
    else if (s.name == "perf_sweep") t = detail::run_perf_sweep(s);
    else if (s.name == "opt_sweep") t = detail::run_opt_sweep(s);
    else if (s.name == "secure_sweep") t = detail::run_secure_sweep(s);
    else if (s.name == "beampattern_heatmap") t = detail::run_beampattern_heatmap(s);
    else if (s.name == "beampattern_compare") t = detail::run_beampattern_compare(s);
    else t = detail::run_secure_beampattern(s);
    nlohmann::json summary = t.metadata.value("summary", nlohmann::json::object());
    t.metadata = {{"version", kVersionTag}, {"seed", s.base_config.seed}, {"spec", spec_to_json(s)}};
    if (!summary.empty()) t.metadata["summary"] = summary;
    return t;
}

/// True when an optimizer experiment found no feasible instance at all.
inline bool infeasible_everywhere(const ResultTable& t) {
    const auto it = t.metadata.find("summary");
    return it != t.metadata.end() && it->value("all_infeasible", false);
}

} // namespace cfisac
