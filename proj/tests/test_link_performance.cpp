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
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cfisac/link_performance.hpp"

using namespace cfisac;

namespace {

RMatrix constant(Eigen::Index r, Eigen::Index c, double v) { return RMatrix::Constant(r, c, v); }

LargeScaleGains mixed_gains() {
    auto g = LargeScaleGains::uniform(2, 2, 2, 2, 1.0);
    g.h << 1.0, 0.4, 0.3, 2.0;
    g.g_dl << 0.5, 0.2, 0.8, 1.5;
    g.g_ul << 1.2, 0.3, 0.6, 0.9;
    return g;
}

MonteCarloOptions mc(std::size_t trials, std::uint64_t seed = 1) {
    MonteCarloOptions o;
    o.trials = trials;
    o.seed = seed;
    return o;
}

} // namespace

TEST(CommSe, Log2OfOnePlusSinr) {
    EXPECT_DOUBLE_EQ(comm_se(0.0), 0.0);
    EXPECT_DOUBLE_EQ(comm_se(1.0), 1.0);
    EXPECT_DOUBLE_EQ(comm_se(3.0), 2.0);
    EXPECT_DOUBLE_EQ(comm_se(7.0), 3.0);
    EXPECT_THROW(comm_se(-0.1), std::invalid_argument);
}

TEST(CommClosedForm, SingleLinkHandValues) {
    // One AP, one antenna, one user: SINR = L(L+1) z^2 / sigma^2.
    EXPECT_DOUBLE_EQ(comm_sinr_closed_form(constant(1, 1, 1.0), constant(1, 0, 0.0), 1, 1.0)[0], 2.0);
    EXPECT_DOUBLE_EQ(comm_sinr_closed_form(constant(1, 1, 2.0), constant(1, 0, 0.0), 1, 2.0)[0], 4.0);
    EXPECT_DOUBLE_EQ(comm_sinr_closed_form(constant(1, 1, 1.0), constant(1, 0, 0.0), 2, 1.0)[0], 6.0);
}

TEST(CommClosedForm, TwoApsTwoUsersOneTargetByHand) {
    // L = 2, all gains 1, sigma^2 = 1:
    // num = 2*3*2 + 4*(4 - 2) = 20; den = 2*2 (MUI) + 2*2 (SSI) + 1 = 9.
    const auto s = comm_sinr_closed_form(constant(2, 2, 1.0), constant(2, 1, 1.0), 2, 1.0);
    EXPECT_DOUBLE_EQ(s[0], 20.0 / 9.0);
    EXPECT_DOUBLE_EQ(s[1], 20.0 / 9.0);
    // eta = (4, 1): squares = 5, coherent = 3, num = 6*5 + 4*4 = 46; den = 2*5 + 2*5 + 1 = 21.
    const std::vector<double> eta{4.0, 1.0};
    EXPECT_DOUBLE_EQ(comm_sinr_closed_form(constant(2, 2, 1.0), constant(2, 1, 1.0), 2, 1.0, eta)[0], 46.0 / 21.0);
}

TEST(CommClosedForm, RejectsBadInputs) {
    EXPECT_THROW(comm_sinr_closed_form(constant(1, 1, 1.0), constant(1, 0, 0.0), 1, 0.0), std::invalid_argument);
    EXPECT_THROW(comm_sinr_closed_form(constant(1, 1, 1.0), constant(1, 0, 0.0), 0, 1.0), std::invalid_argument);
    const std::vector<double> eta{1.0, 1.0};
    EXPECT_THROW(comm_sinr_closed_form(constant(1, 1, 1.0), constant(1, 0, 0.0), 1, 1.0, eta), std::invalid_argument);
}

TEST(CommClosedForm, IncreasesWithAntennas) {
    const auto g = mixed_gains();
    for (std::size_t k = 0; k < 2; ++k) {
        double prev = 0.0;
        for (std::size_t L : {1u, 2u, 4u, 8u, 16u, 64u}) {
            const double s = comm_sinr_closed_form(g.h, g.g_dl, L, 0.1)[k];
            EXPECT_GT(s, prev);
            prev = s;
        }
    }
}

TEST(CommClosedForm, AddingTargetNeverHelps) {
    const auto g = mixed_gains();
    RMatrix more(2, 3);
    more << g.g_dl, RMatrix::Constant(2, 1, 0.7);
    const auto a = comm_sinr_closed_form(g.h, g.g_dl, 4, 0.1);
    const auto b = comm_sinr_closed_form(g.h, more, 4, 0.1);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_LT(b[k], a[k]);
}

TEST(SensingClosedForm, SingleTargetHandValue) {
    // M = N = 1, K = 0, T = 1, L = 2, gains 1, alpha 1, sigma^2 = 1:
    // illumination = 2*3 = 6; SINR = 6 * 6 / (2 * 1 * 1) = 18.
    const std::vector<Complex> alpha{Complex(1.0)};
    const auto s = sensing_sinr_closed_form(constant(1, 1, 1.0), constant(1, 1, 1.0), constant(1, 0, 0.0), alpha, 2, 1.0);
    EXPECT_DOUBLE_EQ(s(0, 0), 18.0);
}

TEST(SensingClosedForm, IncreasesWithReflectivity) {
    const auto g = mixed_gains();
    std::vector<Complex> alpha{Complex(0.5), Complex(1.0)};
    const auto lo = sensing_sinr_closed_form(g.g_ul, g.g_dl, g.h, alpha, 4, 0.1);
    alpha[0] = Complex(0.0, 2.0);
    const auto hi = sensing_sinr_closed_form(g.g_ul, g.g_dl, g.h, alpha, 4, 0.1);
    for (Eigen::Index n = 0; n < 2; ++n) {
        EXPECT_GT(hi(n, 0), lo(n, 0));
        EXPECT_LT(hi(n, 1), lo(n, 1));
    }
}

TEST(SensingClosedForm, FormsAgreeForOneTarget) {
    auto g = mixed_gains();
    const RMatrix gdl = g.g_dl.leftCols(1), gul = g.g_ul.leftCols(1);
    const std::vector<Complex> alpha{Complex(1.0)};
    const std::vector<double> eta{1.0, 1.0};
    const auto a = sensing_sinr_closed_form(gul, gdl, g.h, alpha, 4, 0.1, eta, SensingForm::derived);
    const auto b = sensing_sinr_closed_form(gul, gdl, g.h, alpha, 4, 0.1, eta, SensingForm::as_printed);
    EXPECT_EQ(a, b);
}

TEST(SensingClosedForm, NoTargetsRejected) {
    const std::vector<Complex> alpha;
    EXPECT_THROW(sensing_sinr_closed_form(constant(1, 0, 0.0), constant(1, 0, 0.0), constant(1, 1, 1.0), alpha, 2, 1.0),
                 std::invalid_argument);
}

TEST(MonteCarlo, CommMatchesClosedForm) {
    const auto g = mixed_gains();
    const double sigma2 = 0.5;
    const std::vector<double> eta{0.3, 1.7};
    const auto closed = comm_sinr_closed_form(g.h, g.g_dl, 4, sigma2, eta);
    const auto est = comm_sinr_monte_carlo(ChannelSampler{g, 4}, scaled_mrt_rule(eta), sigma2, mc(20000, 3));
    ASSERT_EQ(est.sinr.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& r = est.sinr[k].log_ratio;
        EXPECT_LT(std::abs(r.value - comm_se(closed[k])), 4.0 * r.std_error) << "user " << k;
        EXPECT_GT(r.std_error, 0.0);
    }
}

TEST(MonteCarlo, SensingMatchesClosedForm) {
    const auto g = mixed_gains();
    const double sigma2 = 0.5;
    const std::vector<Complex> alpha{Complex(0.8, 0.2), Complex(1.1)};
    const std::vector<double> eta{1.0, 1.0};
    const auto closed = sensing_sinr_closed_form(g.g_ul, g.g_dl, g.h, alpha, 4, sigma2, eta);
    const auto est = sensing_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), alpha, sigma2, mc(20000, 5));
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 2; ++t) {
            const auto& r = est.sinr(n, t).log_ratio;
            const double c = std::log2(1.0 + closed(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t)));
            EXPECT_LT(std::abs(r.value - c), 4.0 * r.std_error) << n << "," << t;
        }
}

TEST(MonteCarlo, PrintedIndexPatternDisagreesWithSimulation) {
    auto g = LargeScaleGains::uniform(2, 1, 3, 2, 1.0);
    g.g_dl << 3.0, 0.1, 0.1, 3.0;
    g.h << 5.0, 5.0, 5.0, 0.1, 0.1, 0.1;
    const std::vector<Complex> alpha{Complex(1.0), Complex(1.0)};
    const std::vector<double> eta{1.0, 1.0};
    const auto derived = sensing_sinr_closed_form(g.g_ul, g.g_dl, g.h, alpha, 4, 0.01, eta, SensingForm::derived);
    const auto printed = sensing_sinr_closed_form(g.g_ul, g.g_dl, g.h, alpha, 4, 0.01, eta, SensingForm::as_printed);
    const auto est = sensing_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), alpha, 0.01, mc(20000, 8));
    const auto& r = est.sinr(0, 1).log_ratio;
    EXPECT_LT(std::abs(r.value - std::log2(1.0 + derived(0, 1))), 4.0 * r.std_error);
    EXPECT_GT(std::abs(r.value - std::log2(1.0 + printed(0, 1))), 10.0 * r.std_error);
}

TEST(MonteCarlo, DirectLinkMustBeRemoved) {
    auto g = mixed_gains();
    g.f.setConstant(100.0);
    const std::vector<Complex> alpha{Complex(1.0), Complex(1.0)};
    auto with = mc(2000, 2);
    const auto sub = sensing_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), alpha, 0.1, with);
    with.simulate_dli = false;
    const auto none = sensing_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), alpha, 0.1, with);
    with.simulate_dli = true;
    with.subtract_dli = false;
    const auto kept = sensing_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), alpha, 0.1, with);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t t = 0; t < 2; ++t) {
            const double a = sub.sinr(n, t).ratio.value;
            EXPECT_NEAR(a / none.sinr(n, t).ratio.value, 1.0, 1e-9);
            EXPECT_LT(kept.sinr(n, t).ratio.value, 0.1 * a);
        }
}

TEST(MonteCarlo, SingleTargetHasNoMultiTargetTerm) {
    auto g = LargeScaleGains::uniform(2, 2, 2, 1, 1.0);
    g.g_ul << 0.5, 2.0;
    const std::vector<Complex> alpha{Complex(1.0)};
    const double sigma2 = 0.3;
    const auto est = sensing_sinr_monte_carlo(ChannelSampler{g, 6}, mrt_rule(), alpha, sigma2, mc(20000, 4));
    for (Eigen::Index n = 0; n < 2; ++n) {
        EXPECT_DOUBLE_EQ(est.mti(n, 0), 0.0);
        // Residual is combined noise, E|u^H n|^2 = sigma^2 L zeta_ul.
        EXPECT_NEAR(est.residual(n, 0) / (sigma2 * 6.0 * g.g_ul(n, 0)), 1.0, 0.03);
    }
}

TEST(MonteCarlo, NoTargetsMeansNoSensingInterference) {
    const auto g = LargeScaleGains::uniform(2, 1, 3, 0, 1.0);
    const auto est = comm_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), 1.0, mc(500));
    for (double v : est.ssi) EXPECT_EQ(v, 0.0);
    for (double v : est.mui) EXPECT_GT(v, 0.0);
}

TEST(MonteCarlo, StandardErrorShrinksWithTrials) {
    const auto g = mixed_gains();
    const auto a = comm_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), 0.5, mc(5000, 6));
    const auto b = comm_sinr_monte_carlo(ChannelSampler{g, 4}, mrt_rule(), 0.5, mc(20000, 7));
    for (std::size_t k = 0; k < 2; ++k)
        EXPECT_NEAR(a.sinr[k].log_ratio.std_error / b.sinr[k].log_ratio.std_error, 2.0, 0.3);
}

TEST(MonteCarlo, RequiresEnoughTrials) {
    EXPECT_THROW(comm_sinr_monte_carlo(ChannelSampler{mixed_gains(), 4}, mrt_rule(), 1.0, mc(50)),
                 std::invalid_argument);
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResult) {
    auto opt = mc(600, 9);
    const auto a = comm_sinr_monte_carlo(ChannelSampler{mixed_gains(), 3}, mrt_rule(), 0.5, opt);
    opt.threads = 4;
    const auto b = comm_sinr_monte_carlo(ChannelSampler{mixed_gains(), 3}, mrt_rule(), 0.5, opt);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a.sinr[k].ratio.value, b.sinr[k].ratio.value);
}

TEST(Jackknife, MeanOfIidSeriesMatchesClassicalError) {
    std::vector<double> a{1.0, 4.0, 2.0, 8.0, 5.0}, b(5, 1.0);
    const auto r = jackknife_ratio(a, b);
    EXPECT_DOUBLE_EQ(r.ratio.value, 4.0);
    // sample sd = sqrt(7.5), error sqrt(7.5 / 5).
    EXPECT_NEAR(r.ratio.std_error, std::sqrt(1.5), 1e-12);
    std::vector<double> c{2.0, 4.0, 6.0};
    std::vector<double> d{1.0, 2.0, 3.0};
    EXPECT_NEAR(jackknife_ratio(c, d).ratio.std_error, 0.0, 1e-15);
    EXPECT_THROW(jackknife_ratio(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Leakage, ZeroWhenUsersAreSilent) {
    const auto ch = sample_channels(mixed_gains(), 4, 2);
    auto p = mrt_precoders(ch);
    for (auto& w : p.w) w.setZero();
    const auto lt = leakage_se(ch, p, 1.0);
    EXPECT_EQ(lt.se.rows(), 2);
    EXPECT_EQ(lt.se.cols(), 2);
    EXPECT_EQ(lt.se.maxCoeff(), 0.0);
}

TEST(Leakage, ZeroForBeamsOrthogonalToTarget) {
    auto ch = sample_channels(LargeScaleGains::uniform(1, 1, 1, 1, 1.0), 2, 3);
    ch.g_dl(0, 0) = CVector::Zero(2);
    ch.g_dl(0, 0)[0] = 1.0;
    auto p = mrt_precoders(ch);
    p.w(0, 0) = CVector::Zero(2);
    p.w(0, 0)[1] = Complex(3.0, 1.0);
    EXPECT_EQ(leakage_se(ch, p, 1.0).se(0, 0), 0.0);
}

TEST(Leakage, MatchesStackedVectorOracle) {
    const auto ch = sample_channels(mixed_gains(), 3, 4);
    auto p = scale_to_per_ap_power(mrt_precoders(ch), 2.0);
    const double sigma2 = 0.7;
    const auto lt = leakage_se(ch, p, sigma2);
    auto stack = [](const VectorGrid& g, std::size_t col) {
        CVector v(static_cast<Eigen::Index>(3 * g.rows()));
        for (std::size_t m = 0; m < g.rows(); ++m) v.segment(static_cast<Eigen::Index>(3 * m), 3) = g(m, col);
        return v;
    };
    for (std::size_t t = 0; t < 2; ++t) {
        const CVector gt = stack(ch.g_dl, t);
        for (std::size_t k = 0; k < 2; ++k) {
            const double sig = std::norm(gt.dot(stack(p.w, k)));
            double rest = sigma2 + std::norm(gt.dot(stack(p.w, 1 - k)));
            for (std::size_t l = 0; l < 2; ++l) rest += std::norm(gt.dot(stack(p.s, l)));
            EXPECT_NEAR(lt.se(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)), std::log2(1.0 + sig / rest),
                        1e-12);
        }
        EXPECT_DOUBLE_EQ(lt.max_per_target[t], lt.se.row(static_cast<Eigen::Index>(t)).maxCoeff());
    }
}

TEST(Leakage, UserPermutationPermutesColumns) {
    auto g = LargeScaleGains::uniform(2, 1, 3, 2, 1.0);
    const auto ch = sample_channels(g, 3, 5);
    const auto p = mrt_precoders(ch);
    auto q = p;
    const std::size_t perm[3] = {2, 0, 1};
    for (std::size_t m = 0; m < 2; ++m)
        for (std::size_t k = 0; k < 3; ++k) q.w(m, k) = p.w(m, perm[k]);
    const auto a = leakage_se(ch, p, 0.5);
    const auto b = leakage_se(ch, q, 0.5);
    for (Eigen::Index t = 0; t < 2; ++t)
        for (std::size_t k = 0; k < 3; ++k)
            EXPECT_NEAR(b.se(t, static_cast<Eigen::Index>(k)), a.se(t, static_cast<Eigen::Index>(perm[k])), 1e-12);
}

TEST(Uatf, DeterministicEffectiveGain) {
    // w = h / |h|^2 makes the effective gain exactly one: SE = log2(1 + 1/2).
    const auto g = LargeScaleGains::uniform(1, 1, 1, 0, 1.0);
    const PrecoderRule inverse = [](const ChannelSet& ch) {
        PrecoderSet p = mrt_precoders(ch);
        p.w(0, 0) /= ch.h(0, 0).squaredNorm();
        return p;
    };
    const auto rep = uatf_se(ChannelSampler{g, 1}, inverse, 2.0, mc(200));
    EXPECT_NEAR(rep.se_uatf[0], std::log2(1.5), 1e-12);
    EXPECT_NEAR(rep.se_ergodic[0].value, std::log2(1.5), 1e-12);
}

TEST(Uatf, DistributedEqualsColocatedForEqualGains) {
    const auto cf = uatf_se(ChannelSampler{LargeScaleGains::uniform(4, 1, 3, 1, 1.0), 4}, mrt_rule(), 1.0, mc(20000, 2));
    const auto co = uatf_se(ChannelSampler{LargeScaleGains::uniform(1, 1, 3, 1, 1.0), 16}, mrt_rule(), 1.0, mc(20000, 3));
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(cf.se_uatf[k] / co.se_uatf[k], 1.0, 0.03);
        const double se = std::hypot(cf.se_ergodic[k].std_error, co.se_ergodic[k].std_error);
        EXPECT_LT(std::abs(cf.se_ergodic[k].value - co.se_ergodic[k].value), 4.0 * se);
    }
}

TEST(Uatf, BoundDoesNotExceedErgodic) {
    const auto g = mixed_gains();
    for (std::size_t L : {1u, 4u, 16u}) {
        const auto rep = uatf_se(ChannelSampler{g, L}, mrt_rule(), 0.2, mc(4000, L));
        for (std::size_t k = 0; k < 2; ++k)
            EXPECT_LE(rep.se_uatf[k], rep.se_ergodic[k].value + 3.0 * rep.se_ergodic[k].std_error);
        EXPECT_LE(rep.sum_uatf(), rep.sum_ergodic());
    }
}

TEST(PerfReport, CsvAndJsonLayout) {
    const auto g = mixed_gains();
    const std::vector<Complex> alpha{Complex(1.0), Complex(0.5)};
    const std::vector<double> eta{1.0, 1.0};
    const auto rep = evaluate_performance(g, 2, alpha, 0.5, eta, mc(200));
    std::ostringstream os;
    write_perf_csv(os, rep);
    const std::string text = os.str();
    EXPECT_EQ(text.rfind("entity,index_a,index_b,metric,closed,mc,stderr\n", 0), 0u);
    EXPECT_EQ(text.find('\r'), std::string::npos);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 + 4 + 4);
    EXPECT_NE(text.find("user,1,,comm_se,"), std::string::npos);
    EXPECT_NE(text.find("ul_ap_target,1,0,sens_se,"), std::string::npos);
    EXPECT_NE(text.find("target_user,0,1,leak_se,,"), std::string::npos);

    const nlohmann::json j = rep;
    EXPECT_EQ(j.at("comm_se_closed").size(), 2u);
    EXPECT_EQ(j.at("sens_se_mc").size(), 2u);
    EXPECT_EQ(j.at("sens_se_mc")[0][0].at("std_error").is_number(), true);
    EXPECT_EQ(j.at("trials"), 200);
    EXPECT_DOUBLE_EQ(j.at("sigma2_watts").get<double>(), 0.5);
}
