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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cfisac/optimizer.hpp"

using namespace cfisac;

namespace {

DesignProblem make_problem(std::size_t K, std::size_t T, double gamma_dbm, std::uint64_t seed = 3,
                           std::size_t M = 4, std::size_t L = 8) {
    SystemConfig c;
    c.M = M;
    c.N = M;
    c.K = K;
    c.T = T;
    c.L = L;
    c.seed = seed;
    const auto geo = place_entities(c);
    DesignProblem pb;
    pb.channels = sample_channels(geo, derive_seed(seed, StreamKind::trial, 0));
    pb.target_angles.assign(M, std::vector<double>(T));
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t t = 0; t < T; ++t)
            pb.target_angles[m][t] = ula_bearing(geo.dl_ap_positions[m], geo.targets[t].position);
    pb.gamma_th_watts = std::isinf(gamma_dbm) ? 0.0 : dbm_to_watts(gamma_dbm);
    pb.p_max_watts = dbm_to_watts(c.p_max_dbm);
    pb.noise_watts = noise_power_watts(c);
    return pb;
}

bool non_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1]) return false;
    return true;
}

} // namespace

TEST(Feasibility, SilentTransmitterSlack) {
    const auto pb = make_problem(2, 2, 10.0);
    PrecoderSet p = mrt_precoders(pb.channels);
    for (auto& v : p.w) v.setZero();
    for (auto& v : p.s) v.setZero();
    const auto s = feasibility_check(p, pb);
    for (double v : s.power) EXPECT_DOUBLE_EQ(v, pb.p_max_watts);
    for (Eigen::Index i = 0; i < s.beampattern.size(); ++i) EXPECT_DOUBLE_EQ(s.beampattern.data()[i], -pb.gamma_th_watts);
    EXPECT_EQ(s.leakage.size(), 0);
    EXPECT_EQ(s.violations(pb).size(), 8u);
}

TEST(Feasibility, FullPowerMrtSitsOnTheCap) {
    const auto pb = make_problem(2, 2, 10.0);
    const auto s = feasibility_check(mrt_baseline(pb), pb);
    for (double v : s.power) EXPECT_NEAR(v, 0.0, 1e-12 * pb.p_max_watts);
}

TEST(Feasibility, MatchesDirectEvaluation) {
    auto pb = make_problem(3, 2, 5.0, 7);
    pb.delta_max_bps_hz = 0.5;
    ComplexNormal cn(99);
    PrecoderSet p = mrt_precoders(pb.channels);
    for (auto& v : p.w) v = cn.vector(8, 0.02);
    for (auto& v : p.s) v = cn.vector(8, 0.02);
    const auto s = feasibility_check(p, pb);
    for (std::size_t m = 0; m < 4; ++m) {
        double pw = 0.0;
        for (std::size_t k = 0; k < 3; ++k) pw += p.w(m, k).squaredNorm();
        for (std::size_t t = 0; t < 2; ++t) pw += p.s(m, t).squaredNorm();
        EXPECT_NEAR(s.power[m], pb.p_max_watts - pw, 1e-12);
        for (std::size_t t = 0; t < 2; ++t) {
            const CVector a = steering_vector(8, pb.target_angles[m][t]);
            double g = 0.0;
            for (std::size_t k = 0; k < 3; ++k) g += std::norm(a.dot(p.w(m, k)));
            for (std::size_t l = 0; l < 2; ++l) g += std::norm(a.dot(p.s(m, l)));
            EXPECT_NEAR(s.beampattern(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t)),
                        g - pb.gamma_th_watts, 1e-12);
        }
    }
    const auto lt = leakage_se(pb.channels, p, pb.noise_watts);
    EXPECT_LT((s.leakage - (RMatrix::Constant(2, 3, 0.5) - lt.se)).norm(), 1e-12);
}

TEST(Optimizer, SingleUserReachesFullPowerMrt) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto pb = make_problem(1, 0, -std::numeric_limits<double>::infinity(), seed);
        const auto rep = maximize_sum_se(pb);
        const double opt = instantaneous_sum_se(pb.channels, mrt_baseline(pb), pb.noise_watts);
        EXPECT_NEAR(rep.sum_se(), opt, 1e-3 * opt);
        EXPECT_GE(rep.sum_se(), rep.baseline_sum_se - 1e-9);
    }
}

TEST(Optimizer, TraceIsMonotoneAndEndsFeasible) {
    for (std::uint64_t seed : {4u, 5u, 6u}) {
        const auto pb = make_problem(3, 2, 10.0, seed);
        const auto rep = maximize_sum_se(pb);
        ASSERT_FALSE(rep.objective_trace.empty());
        EXPECT_TRUE(non_decreasing(rep.objective_trace));
        EXPECT_TRUE(rep.feasibility.feasible(pb)) << ::testing::PrintToString(rep.feasibility.violations(pb));
        EXPECT_LE(rep.iterations, pb.tolerances.max_iterations);
        EXPECT_NEAR(rep.sum_se(), instantaneous_sum_se(pb.channels, rep.precoders, pb.noise_watts), 1e-9);
    }
}

TEST(Optimizer, ReportedSlackMatchesIndependentCheck) {
    auto pb = make_problem(2, 3, 10.0, 8);
    pb.delta_max_bps_hz = 0.5;
    const auto rep = maximize_sum_se_secure(pb);
    const auto s = feasibility_check(rep.precoders, pb);
    for (std::size_t m = 0; m < s.power.size(); ++m) EXPECT_NEAR(rep.feasibility.power[m], s.power[m], 1e-8);
    EXPECT_LT((rep.feasibility.beampattern - s.beampattern).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((rep.feasibility.leakage - s.leakage).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Optimizer, DroppingTheFloorNeverHurts) {
    for (std::uint64_t seed : {9u, 10u}) {
        auto pb = make_problem(2, 3, 10.0, seed);
        pb.delta_max_bps_hz = 0.5;
        const auto chain = solve_relaxation_chain(pb);
        EXPECT_GE(chain.unconstrained.sum_se(), chain.beampattern.sum_se() - 1e-9);
        EXPECT_GE(chain.beampattern.sum_se(), chain.secure.sum_se() - 1e-9);
        EXPECT_TRUE(chain.secure.feasibility.feasible(pb));
    }
}

TEST(Optimizer, FloorAboveArrayGainIsInfeasible) {
    auto pb = make_problem(2, 2, 10.0);
    pb.gamma_th_watts = 1.01 * 8.0 * pb.p_max_watts;
    try {
        maximize_sum_se(pb);
        FAIL() << "expected InfeasibleProblem";
    } catch (const InfeasibleProblem& e) {
        ASSERT_FALSE(e.violated().empty());
        EXPECT_NE(std::string(e.what()).find("beampattern["), std::string::npos);
    }
}

TEST(Optimizer, InfiniteLeakageCapIsTheUnconstrainedProblem) {
    auto pb = make_problem(2, 2, 10.0, 11);
    const auto plain = maximize_sum_se(pb);
    pb.delta_max_bps_hz = std::numeric_limits<double>::infinity();
    const auto secure = maximize_sum_se_secure(pb);
    EXPECT_EQ(plain.objective_trace, secure.objective_trace);
    EXPECT_EQ(plain.precoders.w, secure.precoders.w);
    pb.delta_max_bps_hz.reset();
    EXPECT_THROW(maximize_sum_se_secure(pb), std::invalid_argument);
}

TEST(Optimizer, ZeroLeakageForcesTargetNulls) {
    auto pb = make_problem(2, 1, 0.0, 12, 2, 4);
    pb.delta_max_bps_hz = 0.0;
    const auto rep = maximize_sum_se_secure(pb);
    EXPECT_TRUE(rep.feasibility.feasible(pb));
    const auto lt = leakage_se(pb.channels, rep.precoders, pb.noise_watts);
    EXPECT_LE(lt.se.maxCoeff(), pb.tolerances.leakage_bps_hz);
    EXPECT_GT(rep.sum_se(), 0.0);
}

TEST(Optimizer, RejectsMalformedProblems) {
    auto pb = make_problem(2, 2, 10.0);
    pb.target_angles.pop_back();
    EXPECT_THROW(maximize_sum_se(pb), std::invalid_argument);
    pb = make_problem(2, 2, 10.0);
    pb.p_max_watts = 0.0;
    EXPECT_THROW(maximize_sum_se(pb), std::invalid_argument);
    pb = make_problem(2, 2, 10.0);
    pb.delta_max_bps_hz = -1.0;
    EXPECT_THROW(maximize_sum_se_secure(pb), std::invalid_argument);
}

TEST(Optimizer, TraceCsvAndJson) {
    const auto pb = make_problem(2, 2, 10.0, 13);
    const auto rep = maximize_sum_se(pb);
    std::ostringstream os;
    write_trace_csv(os, rep);
    const std::string s = os.str();
    EXPECT_EQ(s.rfind("iteration,sum_se\n0,", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), rep.objective_trace.size() + 1);
    const auto j = to_json_tree(rep);
    EXPECT_EQ(j.at("objective_trace").size(), rep.objective_trace.size());
    EXPECT_DOUBLE_EQ(j.at("sum_se").get<double>(), rep.sum_se());
    EXPECT_EQ(j.at("slack").at("power").size(), 4u);
    EXPECT_FALSE(j.at("start").get<std::string>().empty());
}
