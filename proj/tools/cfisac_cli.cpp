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

// cfisac run <spec-file> [--seed N] [--trials N] [--topologies N] [--out PATH] [--threads N]
//
// Exit codes: 0 success, 1 spec or usage error, 2 optimizer infeasible on
// every instance, 3 I/O or runtime failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfisac/experiments.hpp"

namespace {

constexpr int kExitSpecError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitFailure = 3;

std::string json_path_for(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    if (p.extension() == ".csv") p.replace_extension(".json");
    else p += ".json";
    return p.string();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cell-free ISAC simulation experiments"};
    app.require_subcommand(1);

    std::string spec_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials, topologies;
    std::optional<unsigned> threads;
    std::string out;

    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON spec file");
    run->add_option("spec-file", spec_path, "Experiment spec (JSON)")->required();
    run->add_option("--seed", seed, "Master seed (overrides the spec)");
    run->add_option("--trials", trials, "Monte-Carlo trials per point");
    run->add_option("--topologies", topologies, "Random topologies to average over");
    run->add_option("--out", out, "Output CSV path; a .json twin is written next to it");
    run->add_option("--threads", threads, "Worker threads (results do not depend on it)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitSpecError;
    }

    cfisac::ExperimentSpec spec;
    try {
        spec = cfisac::load_spec(spec_path);
        if (seed) spec.base_config.seed = *seed;
        if (trials) spec.trials = *trials;
        if (topologies) spec.topologies = *topologies;
        if (threads) spec.threads = *threads;
        if (!out.empty()) spec.output_path = out;
        spec = cfisac::resolve_spec(spec);
    } catch (const std::invalid_argument& e) {
        std::cerr << "spec error: " << e.what() << '\n';
        return kExitSpecError;
    }
    if (spec.output_path.empty()) spec.output_path = spec.name + ".csv";

    cfisac::ResultTable table;
    try {
        table = cfisac::run_experiment(spec);
    } catch (const std::invalid_argument& e) {
        std::cerr << "spec error: " << e.what() << '\n';
        return kExitSpecError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }

    try {
        cfisac::emit_csv(table, spec.output_path);
        cfisac::emit_json(table, json_path_for(spec.output_path));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    std::cerr << spec.name << ": " << table.rows.size() << " rows -> " << spec.output_path << '\n';

    if (cfisac::infeasible_everywhere(table)) {
        std::cerr << spec.name << ": optimizer infeasible on every instance\n";
        return kExitInfeasible;
    }
    return 0;
}
