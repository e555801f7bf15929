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

#include <gtest/gtest.h>

#include <clocale>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <sys/wait.h>

#include "cfisac/experiments.hpp"

using namespace cfisac;
namespace fs = std::filesystem;

namespace {

ExperimentSpec quick_perf() {
    ExperimentSpec s;
    s.name = "perf_sweep";
    s.base_config.K = 2;
    s.base_config.T = 2;
    s.base_config.seed = 21;
    s.sweep = {"L", {2, 4}};
    s.topologies = 2;
    s.trials = 200;
    s.options = {{"ap_counts", {4}}, {"per_topology", true}};
    return s;
}

std::string csv_text(const ResultTable& t) {
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

[[maybe_unused]] fs::path temp_dir() {
    const auto d = fs::temp_directory_path() / ("cfisac_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::create_directories(d);
    return d;
}

[[maybe_unused]] void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    os << text;
}

[[maybe_unused]] std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

#ifdef CFISAC_CLI_PATH
int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + CFISAC_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
#endif

} // namespace

TEST(Results, RealsUseSeventeenDigitsAndDotSeparator) {
    EXPECT_EQ(format_real(0.1), "0.10000000000000001");
    EXPECT_EQ(format_real(1.0), "1");
    EXPECT_EQ(format_real(-2.5e-13), "-2.4999999999999999e-13");
    const char* old = std::setlocale(LC_NUMERIC, nullptr);
    const std::string saved = old ? old : "C";
    if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8")) {
        EXPECT_EQ(format_real(0.5), "0.5");
        std::setlocale(LC_NUMERIC, saved.c_str());
    }
    const double x = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_real(x)), x);
}

TEST(Results, CsvLayout) {
    ResultTable t;
    t.columns = {{"name", ColumnType::text}, {"n", ColumnType::integer}, {"value", ColumnType::real}};
    t.metadata = {{"seed", 42}};
    EXPECT_EQ(csv_text(t), "# {\"seed\":42}\nname,n,value\n");
    t.add_row({std::string("a,b"), std::int64_t{3}, 0.25});
    t.add_row({std::string("say \"hi\""), std::int64_t{-1}, std::nan("")});
    EXPECT_EQ(csv_text(t), "# {\"seed\":42}\nname,n,value\n\"a,b\",3,0.25\n\"say \"\"hi\"\"\",-1,nan\n");
    EXPECT_THROW(t.add_row({0.1, std::int64_t{1}, 0.2}), std::invalid_argument);
    EXPECT_THROW(t.add_row({std::string("x")}), std::invalid_argument);
}

TEST(Results, CsvRoundTrip) {
    ResultTable t;
    t.columns = {{"label", ColumnType::text}, {"x", ColumnType::real}};
    t.metadata = {{"seed", 7}, {"note", "two\nlines"}};
    t.add_row({std::string("p,q"), 1.0 / 3.0});
    std::istringstream is(csv_text(t));
    const auto doc = read_csv(is);
    EXPECT_EQ(doc.metadata, t.metadata);
    EXPECT_EQ(doc.header, (std::vector<std::string>{"label", "x"}));
    ASSERT_EQ(doc.rows.size(), 1u);
    EXPECT_EQ(doc.rows[0][0], "p,q");
    EXPECT_EQ(std::stod(doc.rows[0][1]), 1.0 / 3.0);
}

TEST(Results, JsonMirrorsTable) {
    ResultTable t;
    t.columns = {{"k", ColumnType::integer}, {"v", ColumnType::real}};
    t.metadata = {{"seed", 1}};
    t.add_row({std::int64_t{2}, 0.5});
    const auto j = to_json_tree(t);
    EXPECT_EQ(j.at("columns")[1].at("type"), "real");
    EXPECT_EQ(j.at("rows")[0][0], 2);
    EXPECT_EQ(j.at("metadata").at("seed"), 1);
}

TEST(Spec, ParsesFlatDocument) {
    const auto s = spec_from_json(nlohmann::json::parse(R"({"experiment":"opt_sweep","M":9,"K":2,"seed":5,
        "sweep":{"parameter":"M","values":[4,9]},"topologies":3,"options":{"gamma_th_dbm":0},
        "target_rcs_m2":["car",2.0]})"));
    EXPECT_EQ(s.name, "opt_sweep");
    EXPECT_EQ(s.base_config.M, 9u);
    EXPECT_EQ(s.base_config.seed, 5u);
    EXPECT_EQ(s.sweep.values, (std::vector<double>{4, 9}));
    EXPECT_EQ(s.topologies, 3u);
    ASSERT_EQ(s.base_config.target_rcs_m2.size(), 2u);
    EXPECT_NEAR(s.base_config.target_rcs_m2[0], std::sqrt(1000.0), 1e-9);
}

TEST(Spec, RejectsMalformedDocuments) {
    auto bad = [](const char* text) { return spec_from_json(nlohmann::json::parse(text)); };
    EXPECT_THROW(bad(R"({"M":4})"), std::invalid_argument);
    EXPECT_THROW(bad(R"({"experiment":"opt_sweep","colour":"red"})"), std::invalid_argument);
    EXPECT_THROW(bad(R"({"experiment":"opt_sweep","M":"four"})"), std::invalid_argument);
    EXPECT_THROW(bad(R"({"experiment":"opt_sweep","rho":2})"), std::invalid_argument);
    EXPECT_THROW(bad(R"({"experiment":"opt_sweep","target_rcs_m2":["dragon"]})"), std::invalid_argument);
    EXPECT_THROW(bad(R"([1,2])"), std::invalid_argument);
    EXPECT_THROW(load_spec("/nonexistent/spec.json"), std::invalid_argument);
}

TEST(Spec, ResolutionChecksExperimentAndOptions) {
    ExperimentSpec s = quick_perf();
    s.name = "warp_drive";
    EXPECT_THROW(resolve_spec(s), std::invalid_argument);
    s = quick_perf();
    s.options["not_an_option"] = 1;
    EXPECT_THROW(resolve_spec(s), std::invalid_argument);
    s = quick_perf();
    s.trials = 10;
    EXPECT_THROW(resolve_spec(s), std::invalid_argument);
    s = quick_perf();
    s.sweep = {"L", {0}};
    EXPECT_THROW(resolve_spec(s), std::invalid_argument);
    s = quick_perf();
    s.sweep = {"L", {2.5}};
    EXPECT_THROW(resolve_spec(s), std::invalid_argument);
    EXPECT_NO_THROW(resolve_spec(quick_perf()));
}

TEST(Spec, JsonRoundTrip) {
    const auto s = resolve_spec(quick_perf());
    const auto back = spec_from_json(spec_to_json(s));
    EXPECT_EQ(back.base_config, s.base_config);
    EXPECT_EQ(back.sweep.parameter, s.sweep.parameter);
    EXPECT_EQ(back.sweep.values, s.sweep.values);
    EXPECT_EQ(back.options, s.options);
    EXPECT_EQ(back.trials, s.trials);
    EXPECT_EQ(back.topologies, s.topologies);
}

TEST(Experiments, MetadataCarriesSeedAndSpec) {
    const auto t = run_experiment(quick_perf());
    EXPECT_EQ(t.metadata.at("seed"), 21);
    EXPECT_EQ(t.metadata.at("version"), kVersionTag);
    EXPECT_EQ(t.metadata.at("spec").at("experiment"), "perf_sweep");
    EXPECT_FALSE(t.rows.empty());
}

TEST(Experiments, ThreadCountDoesNotChangeOutput) {
    auto s = quick_perf();
    const std::string one = csv_text(run_experiment(s));
    s.threads = 3;
    EXPECT_EQ(csv_text(run_experiment(s)), one);
}

TEST(Experiments, MetadataReproducesTheRun) {
    ExperimentSpec s;
    s.name = "opt_sweep";
    s.base_config.K = 2;
    s.base_config.T = 2;
    s.base_config.L = 6;
    s.base_config.seed = 17;
    s.sweep = {"M", {4}};
    s.topologies = 2;
    const std::string first = csv_text(run_experiment(s));
    std::istringstream is(first);
    const auto doc = read_csv(is);
    const auto again = spec_from_json(doc.metadata.at("spec"));
    EXPECT_EQ(csv_text(run_experiment(again)), first);
}

TEST(Experiments, SeedChangesOutput) {
    auto s = quick_perf();
    const std::string a = csv_text(run_experiment(s));
    s.base_config.seed = 22;
    EXPECT_NE(csv_text(run_experiment(s)), a);
}

TEST(Cli, ExitCodes) {
#ifndef CFISAC_CLI_PATH
    GTEST_SKIP() << "command-line tool not built";
#else
    const auto dir = temp_dir();
    const auto good = dir / "good.json";
    write_file(good, R"({"experiment":"hardening","seed":3,"trials":1000,"sweep":{"parameter":"L","values":[1,4]}})");
    const auto out = dir / "hardening.csv";
    EXPECT_EQ(run_cli("run \"" + good.string() + "\" --out \"" + out.string() + "\""), 0);
    const std::string csv = read_file(out);
    EXPECT_EQ(csv.rfind("# {", 0), 0u);
    EXPECT_NE(csv.find("\"seed\":3"), std::string::npos);
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "hardening.json"));

    EXPECT_EQ(run_cli("run \"" + good.string() + "\" --seed 4 --threads 2 --out \"" + (dir / "h4.csv").string() + "\""), 0);
    EXPECT_NE(read_file(dir / "h4.csv").find("\"seed\":4"), std::string::npos);

    const auto broken = dir / "broken.json";
    write_file(broken, R"({"experiment":"hardening","L":)");
    EXPECT_EQ(run_cli("run \"" + broken.string() + "\""), 1);
    const auto unknown = dir / "unknown.json";
    write_file(unknown, R"({"experiment":"nope"})");
    EXPECT_EQ(run_cli("run \"" + unknown.string() + "\""), 1);
    EXPECT_EQ(run_cli("run \"" + (dir / "missing.json").string() + "\""), 1);
    EXPECT_EQ(run_cli("run \"" + good.string() + "\" --trials banana"), 1);

    const auto hopeless = dir / "hopeless.json";
    write_file(hopeless, R"({"experiment":"opt_sweep","K":2,"T":2,"L":4,"topologies":2,
        "sweep":{"parameter":"M","values":[4]},"options":{"gamma_th_dbm":80}})");
    EXPECT_EQ(run_cli("run \"" + hopeless.string() + "\" --out \"" + (dir / "hopeless.csv").string() + "\""), 2);
    fs::remove_all(dir);
#endif
}

TEST(Cli, ShippedConfigsParse) {
    for (const auto& e : fs::directory_iterator(CFISAC_CONFIG_DIR)) {
        if (e.path().extension() != ".json") continue;
        SCOPED_TRACE(e.path().string());
        EXPECT_NO_THROW(resolve_spec(load_spec(e.path().string())));
    }
}
