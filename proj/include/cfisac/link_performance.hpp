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

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfisac/beamforming.hpp"
#include "cfisac/channel.hpp"
#include "cfisac/common.hpp"
#include "cfisac/parallel.hpp"
#include "cfisac/random.hpp"

namespace cfisac {

inline double comm_se(double sinr) {
    if (!(sinr >= 0.0)) throw std::invalid_argument("comm_se: SINR must be >= 0");
    return std::log2(1.0 + sinr);
}

namespace detail {

inline std::vector<double> unit_scaling(std::size_t M) { return std::vector<double>(M, 1.0); }

inline void check_eta(std::span<const double> eta, std::size_t M) {
    if (eta.size() != M) throw std::invalid_argument("power scaling table must have one entry per DL AP");
    for (double e : eta)
        if (!(e >= 0.0)) throw std::invalid_argument("power scaling factors must be >= 0");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Closed forms under MRT precoding (w_mk = sqrt(eta_m) h_mk,
// s_mt = sqrt(eta_m) g_dl_mt) and MRC combining (u_nt = g_ul_nt).
// With eta_m = 1 they reduce to the unscaled MRT/MRC expressions.

/// Per-user communication SINR under MRT.
///
/// numerator   L(L+1) sum_m eta_m z_mk^2 + L^2 sum_m sum_{m' != m} sqrt(eta_m eta_m') z_mk z_m'k
/// denominator L sum_{i != k} sum_m eta_m z_mk z_mi + L sum_t sum_m eta_m z_mk zg_mt + sigma^2
inline std::vector<double> comm_sinr_closed_form(const RMatrix& zeta_h, const RMatrix& zeta_gdl, std::size_t L,
                                                 double sigma2, std::span<const double> eta) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("comm_sinr_closed_form: sigma2 must be > 0");
    if (L < 1) throw std::invalid_argument("comm_sinr_closed_form: L must be >= 1");
    const auto M = zeta_h.rows();
    const auto K = zeta_h.cols();
    const auto T = zeta_gdl.cols();
    if (zeta_gdl.rows() != M) throw std::invalid_argument("comm_sinr_closed_form: zeta tables disagree on M");
    detail::check_eta(eta, static_cast<std::size_t>(M));
    const double Ld = static_cast<double>(L);

    std::vector<double> sinr(static_cast<std::size_t>(K));
    for (Eigen::Index k = 0; k < K; ++k) {
        double coherent = 0.0, squares = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            const double e = eta[static_cast<std::size_t>(m)];
            coherent += std::sqrt(e) * zeta_h(m, k);
            squares += e * zeta_h(m, k) * zeta_h(m, k);
        }
        const double num = Ld * (Ld + 1.0) * squares + Ld * Ld * (coherent * coherent - squares);

        double mui = 0.0, ssi = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            const double e = eta[static_cast<std::size_t>(m)];
            for (Eigen::Index i = 0; i < K; ++i)
                if (i != k) mui += e * zeta_h(m, k) * zeta_h(m, i);
            for (Eigen::Index t = 0; t < T; ++t) ssi += e * zeta_h(m, k) * zeta_gdl(m, t);
        }
        sinr[static_cast<std::size_t>(k)] = num / (Ld * mui + Ld * ssi + sigma2);
    }
    return sinr;
}

inline std::vector<double> comm_sinr_closed_form(const RMatrix& zeta_h, const RMatrix& zeta_gdl, std::size_t L,
                                                 double sigma2) {
    const auto eta = detail::unit_scaling(static_cast<std::size_t>(zeta_h.rows()));
    return comm_sinr_closed_form(zeta_h, zeta_gdl, L, sigma2, eta);
}

/// Index convention for the interference terms of the sensing closed form.
enum class SensingForm {
    /// Interfering target j's illumination uses j's own gains throughout.
    derived,
    /// Alternative index pattern in which the
    /// user-interference and cross-beam sums inside the interference term keep
    /// the desired target's index t. Kept for comparison only; it does not
    /// match simulation when T >= 2.
    as_printed,
};

/// Sensing SINR of every (UL AP n, target t) pair under MRT/MRC.
///
/// With P_j the expected power illuminating target j,
///   P_j = sum_m eta_m [L sum_i zg_mj zh_mi + L(L+1) zg_mj^2 + L sum_{l != j} zg_mj zg_ml]
///         + L^2 sum_m sum_{m' != m} sqrt(eta_m eta_m') zg_mj zg_m'j,
/// SINR_nt = |a_t|^2 L(L+1) zu_nt^2 P_t
///           / (sum_{j != t} |a_j|^2 L zu_nt zu_nj P_j + L sigma^2 zu_nt).
inline RMatrix sensing_sinr_closed_form(const RMatrix& zeta_gul, const RMatrix& zeta_gdl, const RMatrix& zeta_h,
                                        std::span<const Complex> alpha, std::size_t L, double sigma2,
                                        std::span<const double> eta, SensingForm form = SensingForm::derived) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sensing_sinr_closed_form: sigma2 must be > 0");
    if (L < 1) throw std::invalid_argument("sensing_sinr_closed_form: L must be >= 1");
    const auto T = zeta_gdl.cols();
    if (T == 0) throw std::invalid_argument("sensing_sinr_closed_form: no targets to sense (T = 0)");
    const auto M = zeta_gdl.rows();
    const auto N = zeta_gul.rows();
    const auto K = zeta_h.cols();
    if (zeta_gul.cols() != T || zeta_h.rows() != M || static_cast<Eigen::Index>(alpha.size()) != T)
        throw std::invalid_argument("sensing_sinr_closed_form: inconsistent table shapes");
    detail::check_eta(eta, static_cast<std::size_t>(M));
    const double Ld = static_cast<double>(L);

    // illumination(j, c): power illuminating target j; c selects the index used
    // by the user and cross-beam sums (c = j when derived).
    auto illumination = [&](Eigen::Index j, Eigen::Index c) {
        double inner = 0.0, coherent = 0.0, squares = 0.0;
        for (Eigen::Index m = 0; m < M; ++m) {
            const double e = eta[static_cast<std::size_t>(m)];
            double users = 0.0;
            for (Eigen::Index i = 0; i < K; ++i) users += zeta_gdl(m, c) * zeta_h(m, i);
            double beams = 0.0;
            for (Eigen::Index l = 0; l < T; ++l)
                if (l != c) beams += zeta_gdl(m, j) * zeta_gdl(m, l);
            inner += e * (Ld * users + Ld * (Ld + 1.0) * zeta_gdl(m, j) * zeta_gdl(m, j) + Ld * beams);
            coherent += std::sqrt(e) * zeta_gdl(m, j);
            squares += e * zeta_gdl(m, j) * zeta_gdl(m, j);
        }
        return inner + Ld * Ld * (coherent * coherent - squares);
    };

    RMatrix sinr(N, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const double desired = illumination(t, t);
        for (Eigen::Index n = 0; n < N; ++n) {
            const double zu = zeta_gul(n, t);
            const double num = std::norm(alpha[static_cast<std::size_t>(t)]) * Ld * (Ld + 1.0) * zu * zu * desired;
            double mti = 0.0;
            for (Eigen::Index j = 0; j < T; ++j) {
                if (j == t) continue;
                const double pj = form == SensingForm::derived ? illumination(j, j) : illumination(j, t);
                mti += std::norm(alpha[static_cast<std::size_t>(j)]) * Ld * zu * zeta_gul(n, j) * pj;
            }
            sinr(n, t) = num / (mti + Ld * sigma2 * zu);
        }
    }
    return sinr;
}

inline RMatrix sensing_sinr_closed_form(const RMatrix& zeta_gul, const RMatrix& zeta_gdl, const RMatrix& zeta_h,
                                        std::span<const Complex> alpha, std::size_t L, double sigma2) {
    const auto eta = detail::unit_scaling(static_cast<std::size_t>(zeta_gdl.rows()));
    return sensing_sinr_closed_form(zeta_gul, zeta_gdl, zeta_h, alpha, L, sigma2, eta);
}

// ---------------------------------------------------------------------------
// Leakage towards targets that try to decode user data.

struct LeakageTable {
    RMatrix se;                    // T x K, bps/Hz
    std::vector<double> max_per_target;
};

/// Leakage SE of user k at target t:
/// log2(1 + |sum_m g_mt^H w_mk|^2 / (sum_{i != k} |sum_m g_mt^H w_mi|^2 + sum_l |sum_m g_mt^H s_ml|^2 + sigma^2)).
inline LeakageTable leakage_se(const ChannelSet& ch, const PrecoderSet& p, double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("leakage_se: sigma2 must be > 0");
    const std::size_t M = ch.M(), K = p.K(), T = ch.T();
    if (p.M() != M || p.T() != T) throw std::invalid_argument("leakage_se: precoder dimensions do not match channels");
    LeakageTable out;
    out.se = RMatrix::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(K));
    out.max_per_target.assign(T, 0.0);
    std::vector<double> user_power(K);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < K; ++i) {
            Complex c{};
            for (std::size_t m = 0; m < M; ++m) c += ch.g_dl(m, t).dot(p.w(m, i));
            user_power[i] = std::norm(c);
        }
        double sensing = 0.0;
        for (std::size_t l = 0; l < T; ++l) {
            Complex c{};
            for (std::size_t m = 0; m < M; ++m) c += ch.g_dl(m, t).dot(p.s(m, l));
            sensing += std::norm(c);
        }
        double total = sensing + sigma2;
        for (double v : user_power) total += v;
        for (std::size_t k = 0; k < K; ++k) {
            const double se = std::log2(1.0 + user_power[k] / (total - user_power[k]));
            out.se(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = se;
            out.max_per_target[t] = std::max(out.max_per_target[t], se);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation of the signal model.

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Ratio-of-means estimate sum(a) / sum(b) with jackknife standard errors,
/// for both the ratio itself and log2(1 + ratio).
struct RatioEstimate {
    Estimate ratio;
    Estimate log_ratio;  // log2(1 + ratio)
};

inline RatioEstimate jackknife_ratio(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    if (n != b.size() || n < 2) throw std::invalid_argument("jackknife_ratio: need two equal series of length >= 2");
    double A = 0.0, B = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        A += a[i];
        B += b[i];
    }
    RatioEstimate out;
    out.ratio.value = A / B;
    out.log_ratio.value = std::log2(1.0 + out.ratio.value);
    double mr = 0.0, ml = 0.0;
    std::vector<double> r(n), l(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = (A - a[i]) / (B - b[i]);
        l[i] = std::log2(1.0 + r[i]);
        mr += r[i];
        ml += l[i];
    }
    mr /= static_cast<double>(n);
    ml /= static_cast<double>(n);
    double vr = 0.0, vl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vr += (r[i] - mr) * (r[i] - mr);
        vl += (l[i] - ml) * (l[i] - ml);
    }
    const double f = static_cast<double>(n - 1) / static_cast<double>(n);
    out.ratio.std_error = std::sqrt(f * vr);
    out.log_ratio.std_error = std::sqrt(f * vl);
    return out;
}

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Draws fresh channel realizations from fixed large-scale gains.
struct ChannelSampler {
    LargeScaleGains gains;
    std::size_t antennas = 1;
    ChannelSet operator()(std::uint64_t seed, const ChannelKinds& kinds = {}) const {
        return sample_channels(gains, antennas, seed, kinds);
    }
};

/// Builds the precoders (and optionally combiners) for one realization.
using PrecoderRule = std::function<PrecoderSet(const ChannelSet&)>;

inline PrecoderRule mrt_rule() {
    return [](const ChannelSet& ch) { return mrt_precoders(ch); };
}

inline PrecoderRule scaled_mrt_rule(std::vector<double> eta) {
    return [eta = std::move(eta)](const ChannelSet& ch) { return scaled_mrt_precoders(ch, eta); };
}

struct MonteCarloOptions {
    std::size_t trials = 20000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    /// Include the DL-AP -> UL-AP direct link in the UL received signal.
    bool simulate_dli = true;
    /// Remove the (known) direct-link term before combining.
    bool subtract_dli = true;
};

struct CommMonteCarlo {
    std::vector<RatioEstimate> sinr;  // per user; .log_ratio is the SE
    std::vector<double> desired;      // mean DS_k
    std::vector<double> mui;          // mean sum_{i != k} MUI_ki
    std::vector<double> ssi;          // mean sum_t SSI_kt
    std::size_t trials = 0;
};

struct SensingMonteCarlo {
    Grid<RatioEstimate> sinr;  // N x T; .log_ratio is the sensing SE
    RMatrix desired;           // mean |alpha_t|^2 TDS_nt
    RMatrix mti;               // mean multi-target interference power
    RMatrix residual;          // mean power left after removing desired and MTI
    std::size_t trials = 0;
};

struct LinkMonteCarlo {
    CommMonteCarlo comm;
    SensingMonteCarlo sensing;
    RMatrix mean_leakage_se;  // T x K
};

namespace detail {

struct TrialPlan {
    bool comm = true;
    bool sensing = true;
    bool leakage = false;
};

inline LinkMonteCarlo run_link_trials(const ChannelSampler& sampler, const PrecoderRule& rule,
                                      std::span<const Complex> alpha, double sigma2, const MonteCarloOptions& opt,
                                      const TrialPlan& plan) {
    if (opt.trials < 100) throw std::invalid_argument("Monte-Carlo evaluation needs at least 100 trials");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("Monte-Carlo evaluation: sigma2 must be > 0");
    const auto& g = sampler.gains;
    g.validate();
    const std::size_t M = g.M(), N = g.N(), K = g.K(), T = g.T();
    const std::size_t n = opt.trials;
    const bool sense = plan.sensing && T > 0 && N > 0;
    if (sense && alpha.size() != T) throw std::invalid_argument("Monte-Carlo evaluation: need one alpha per target");

    ChannelKinds kinds;
    kinds.users = true;
    kinds.targets_dl = true;
    kinds.targets_ul = sense;
    kinds.inter_ap = sense && opt.simulate_dli;

    const std::size_t NT = N * T;
    std::vector<double> c_num(plan.comm ? n * K : 0), c_den(c_num.size()), c_mui(c_num.size()), c_ssi(c_num.size());
    std::vector<double> s_num(sense ? n * NT : 0), s_den(s_num.size()), s_mti(s_num.size()), s_res(s_num.size());
    std::vector<double> leak(plan.leakage ? n * T * K : 0);

    parallel_for(n, opt.threads, [&](std::size_t trial) {
        const std::uint64_t tseed = derive_seed(opt.seed, StreamKind::trial, trial);
        const ChannelSet ch = sampler(tseed, kinds);
        PrecoderSet p = rule(ch);
        if (p.M() != M || p.K() != K || p.T() != T)
            throw std::invalid_argument("precoder rule returned wrong dimensions");

        if (plan.comm) {
            for (std::size_t k = 0; k < K; ++k) {
                double ds = 0.0, mui = 0.0, ssi = 0.0;
                for (std::size_t i = 0; i < K; ++i) {
                    Complex c{};
                    for (std::size_t m = 0; m < M; ++m) c += ch.h(m, k).dot(p.w(m, i));
                    (i == k ? ds : mui) += std::norm(c);
                }
                for (std::size_t t = 0; t < T; ++t) {
                    Complex c{};
                    for (std::size_t m = 0; m < M; ++m) c += ch.h(m, k).dot(p.s(m, t));
                    ssi += std::norm(c);
                }
                const std::size_t idx = trial * K + k;
                c_num[idx] = ds;
                c_mui[idx] = mui;
                c_ssi[idx] = ssi;
                c_den[idx] = mui + ssi + sigma2;
            }
        }

        if (sense) {
            if (p.u.empty()) p.u = mrc_combiners(ch);
            Xoshiro256 sym_rng(derive_seed(tseed, StreamKind::symbols));
            SymbolBlock sym{qpsk_symbols(K, sym_rng), {}};
            const std::vector<CVector> x = isac_superposition(p, sym, 1.0, false);
            const auto L = static_cast<Eigen::Index>(ch.antennas);
            // Scalar illumination of each target: sum_m g_mt^H x_m.
            std::vector<Complex> illum(T);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t m = 0; m < M; ++m) illum[t] += ch.g_dl(m, t).dot(x[m]);
            for (std::size_t nn = 0; nn < N; ++nn) {
                ComplexNormal noise(derive_seed(tseed, StreamKind::noise, nn));
                CVector dli = CVector::Zero(L);
                if (opt.simulate_dli)
                    for (std::size_t m = 0; m < M; ++m) dli.noalias() += ch.f(m, nn) * x[m];
                CVector y = dli + noise.vector(L, sigma2);
                for (std::size_t t = 0; t < T; ++t) y += (alpha[t] * illum[t]) * ch.g_ul(nn, t);
                if (opt.subtract_dli) y -= dli;
                for (std::size_t t = 0; t < T; ++t) {
                    const CVector& u = p.u(nn, t);
                    const Complex out = u.dot(y);
                    const Complex desired = alpha[t] * u.dot(ch.g_ul(nn, t)) * illum[t];
                    Complex interf{};
                    for (std::size_t j = 0; j < T; ++j)
                        if (j != t) interf += alpha[j] * u.dot(ch.g_ul(nn, j)) * illum[j];
                    const std::size_t idx = trial * NT + nn * T + t;
                    s_num[idx] = std::norm(desired);
                    s_den[idx] = std::norm(out - desired);
                    s_mti[idx] = std::norm(interf);
                    s_res[idx] = std::norm(out - desired - interf);
                }
            }
        }

        if (plan.leakage && T > 0 && K > 0) {
            const LeakageTable lt = leakage_se(ch, p, sigma2);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < K; ++k)
                    leak[trial * T * K + t * K + k] =
                        lt.se(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
        }
    });

    LinkMonteCarlo out;
    auto column = [n](const std::vector<double>& v, std::size_t stride, std::size_t j) {
        std::vector<double> c(n);
        for (std::size_t i = 0; i < n; ++i) c[i] = v[i * stride + j];
        return c;
    };
    if (plan.comm) {
        out.comm.trials = n;
        for (std::size_t k = 0; k < K; ++k) {
            const auto a = column(c_num, K, k);
            const auto b = column(c_den, K, k);
            out.comm.sinr.push_back(jackknife_ratio(a, b));
            out.comm.desired.push_back(mean_of(a));
            out.comm.mui.push_back(mean_of(column(c_mui, K, k)));
            out.comm.ssi.push_back(mean_of(column(c_ssi, K, k)));
        }
    }
    out.sensing.trials = sense ? n : 0;
    out.sensing.sinr = Grid<RatioEstimate>(sense ? N : 0, sense ? T : 0);
    out.sensing.desired = RMatrix::Zero(sense ? N : 0, sense ? T : 0);
    out.sensing.mti = out.sensing.desired;
    out.sensing.residual = out.sensing.desired;
    if (sense) {
        for (std::size_t nn = 0; nn < N; ++nn)
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t j = nn * T + t;
                const auto a = column(s_num, NT, j);
                const auto b = column(s_den, NT, j);
                out.sensing.sinr(nn, t) = jackknife_ratio(a, b);
                const auto r = static_cast<Eigen::Index>(nn);
                const auto c = static_cast<Eigen::Index>(t);
                out.sensing.desired(r, c) = mean_of(a);
                out.sensing.mti(r, c) = mean_of(column(s_mti, NT, j));
                out.sensing.residual(r, c) = mean_of(column(s_res, NT, j));
            }
    }
    out.mean_leakage_se = RMatrix::Zero(plan.leakage ? T : 0, plan.leakage ? K : 0);
    if (plan.leakage)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < K; ++k)
                out.mean_leakage_se(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) =
                    mean_of(column(leak, T * K, t * K + k));
    return out;
}

} // namespace detail

/// Monte-Carlo communication SINR: fresh channels per trial, expectations of
/// DS, MUI and SSI over channels, ratio-of-means estimator.
inline CommMonteCarlo comm_sinr_monte_carlo(const ChannelSampler& sampler, const PrecoderRule& rule, double sigma2,
                                            const MonteCarloOptions& opt) {
    return detail::run_link_trials(sampler, rule, {}, sigma2, opt, {true, false, false}).comm;
}

/// Monte-Carlo sensing SINR: per trial the UL signal is assembled including
/// the direct link, the direct link is subtracted, combiners are applied and
/// the desired echo is separated from the rest.
inline SensingMonteCarlo sensing_sinr_monte_carlo(const ChannelSampler& sampler, const PrecoderRule& rule,
                                                  std::span<const Complex> alpha, double sigma2,
                                                  const MonteCarloOptions& opt) {
    return detail::run_link_trials(sampler, rule, alpha, sigma2, opt, {false, true, false}).sensing;
}

// ---------------------------------------------------------------------------
// Statistical-CSI (use-and-then-forget) bound.

struct UatfReport {
    std::vector<double> se_uatf;      // per user
    std::vector<Estimate> se_ergodic; // per user, E[log2(1 + instantaneous SINR)]
    std::size_t trials = 0;

    double sum_uatf() const {
        double s = 0.0;
        for (double v : se_uatf) s += v;
        return s;
    }
    double sum_ergodic() const {
        double s = 0.0;
        for (const auto& e : se_ergodic) s += e.value;
        return s;
    }
};

/// SE_k = log2(1 + |E[b_kk]|^2 / (sum_i E|b_ki|^2 - |E[b_kk]|^2 + sum_t E|d_kt|^2 + sigma^2)),
/// b_ki = sum_m h_mk^H w_mi and d_kt = sum_m h_mk^H s_mt, expectations by
/// Monte-Carlo. A co-located array is the same call with one AP carrying
/// all antennas.
inline UatfReport uatf_se(const ChannelSampler& sampler, const PrecoderRule& rule, double sigma2,
                          const MonteCarloOptions& opt) {
    if (opt.trials < 100) throw std::invalid_argument("uatf_se: need at least 100 trials");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("uatf_se: sigma2 must be > 0");
    const auto& g = sampler.gains;
    g.validate();
    const std::size_t M = g.M(), K = g.K(), T = g.T();
    const std::size_t n = opt.trials;
    ChannelKinds kinds;
    kinds.targets_ul = false;
    kinds.inter_ap = false;

    std::vector<Complex> gain(n * K);
    std::vector<double> power(n * K), interference(n * K), rate(n * K);
    parallel_for(n, opt.threads, [&](std::size_t trial) {
        const ChannelSet ch = sampler(derive_seed(opt.seed, StreamKind::trial, trial), kinds);
        const PrecoderSet p = rule(ch);
        for (std::size_t k = 0; k < K; ++k) {
            Complex own{};
            double all = 0.0;
            for (std::size_t i = 0; i < K; ++i) {
                Complex c{};
                for (std::size_t m = 0; m < M; ++m) c += ch.h(m, k).dot(p.w(m, i));
                all += std::norm(c);
                if (i == k) own = c;
            }
            double sens = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                Complex c{};
                for (std::size_t m = 0; m < M; ++m) c += ch.h(m, k).dot(p.s(m, t));
                sens += std::norm(c);
            }
            const std::size_t idx = trial * K + k;
            gain[idx] = own;
            power[idx] = all;
            interference[idx] = sens;
            rate[idx] = std::log2(1.0 + std::norm(own) / (all - std::norm(own) + sens + sigma2));
        }
    });

    UatfReport rep;
    rep.trials = n;
    for (std::size_t k = 0; k < K; ++k) {
        Complex mg{};
        double mp = 0.0, mi = 0.0, mr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mg += gain[i * K + k];
            mp += power[i * K + k];
            mi += interference[i * K + k];
            mr += rate[i * K + k];
        }
        const double dn = static_cast<double>(n);
        mg /= dn;
        mp /= dn;
        mi /= dn;
        mr /= dn;
        double vr = 0.0;
        for (std::size_t i = 0; i < n; ++i) vr += (rate[i * K + k] - mr) * (rate[i * K + k] - mr);
        const double sig = std::norm(mg);
        rep.se_uatf.push_back(std::log2(1.0 + sig / (mp - sig + mi + sigma2)));
        rep.se_ergodic.push_back({mr, std::sqrt(vr / (dn - 1.0) / dn)});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Combined report.

struct PerfReport {
    std::vector<double> comm_se_closed;       // K
    std::vector<Estimate> comm_se_mc;         // K
    RMatrix sens_se_closed;                   // N x T
    Grid<Estimate> sens_se_mc;                // N x T
    RMatrix leak_se;                          // T x K, mean over trials
    std::size_t trials = 0;
    double sigma2_watts = 0.0;
};

/// Closed-form and Monte-Carlo SEs of one topology under per-AP scaled
/// MRT/MRC (eta_m = 1 gives the unscaled case).
inline PerfReport evaluate_performance(const LargeScaleGains& gains, std::size_t L, std::span<const Complex> alpha,
                                       double sigma2, std::span<const double> eta, const MonteCarloOptions& opt) {
    PerfReport rep;
    rep.trials = opt.trials;
    rep.sigma2_watts = sigma2;
    for (double s : comm_sinr_closed_form(gains.h, gains.g_dl, L, sigma2, eta)) rep.comm_se_closed.push_back(comm_se(s));
    const bool sense = gains.T() > 0 && gains.N() > 0;
    if (sense)
        rep.sens_se_closed =
            sensing_sinr_closed_form(gains.g_ul, gains.g_dl, gains.h, alpha, L, sigma2, eta)
                .unaryExpr([](double s) { return std::log2(1.0 + s); });

    ChannelSampler sampler{gains, L};
    const auto mc = detail::run_link_trials(sampler, scaled_mrt_rule({eta.begin(), eta.end()}), alpha, sigma2, opt,
                                            {true, true, gains.T() > 0});
    for (const auto& r : mc.comm.sinr) rep.comm_se_mc.push_back(r.log_ratio);
    rep.sens_se_mc = Grid<Estimate>(mc.sensing.sinr.rows(), mc.sensing.sinr.cols());
    for (std::size_t i = 0; i < mc.sensing.sinr.rows(); ++i)
        for (std::size_t j = 0; j < mc.sensing.sinr.cols(); ++j) rep.sens_se_mc(i, j) = mc.sensing.sinr(i, j).log_ratio;
    rep.leak_se = mc.mean_leakage_se;
    return rep;
}

inline void to_json(nlohmann::json& j, const Estimate& e) { j = {{"value", e.value}, {"std_error", e.std_error}}; }

inline void to_json(nlohmann::json& j, const PerfReport& r) {
    auto matrix = [](const RMatrix& m) {
        nlohmann::json a = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
            a.push_back(row);
        }
        return a;
    };
    nlohmann::json sens_mc = nlohmann::json::array();
    for (std::size_t i = 0; i < r.sens_se_mc.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < r.sens_se_mc.cols(); ++c) row.push_back(r.sens_se_mc(i, c));
        sens_mc.push_back(row);
    }
    j = {{"comm_se_closed", r.comm_se_closed},
         {"comm_se_mc", r.comm_se_mc},
         {"sens_se_closed", matrix(r.sens_se_closed)},
         {"sens_se_mc", sens_mc},
         {"leak_se", matrix(r.leak_se)},
         {"trials", r.trials},
         {"sigma2_watts", r.sigma2_watts}};
}

/// Flat CSV: entity,index_a,index_b,metric,closed,mc,stderr. Closed-form cells
/// are empty for metrics without a closed form.
inline void write_perf_csv(std::ostream& os, const PerfReport& r) {
    const auto precision = os.precision(17);
    os << "entity,index_a,index_b,metric,closed,mc,stderr\n";
    for (std::size_t k = 0; k < r.comm_se_closed.size(); ++k) {
        os << "user," << k << ",,comm_se," << r.comm_se_closed[k] << ',';
        if (k < r.comm_se_mc.size()) os << r.comm_se_mc[k].value << ',' << r.comm_se_mc[k].std_error;
        else os << ',';
        os << '\n';
    }
    for (std::size_t n = 0; n < r.sens_se_mc.rows(); ++n)
        for (std::size_t t = 0; t < r.sens_se_mc.cols(); ++t)
            os << "ul_ap_target," << n << ',' << t << ",sens_se,"
               << r.sens_se_closed(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t)) << ','
               << r.sens_se_mc(n, t).value << ',' << r.sens_se_mc(n, t).std_error << '\n';
    for (Eigen::Index t = 0; t < r.leak_se.rows(); ++t)
        for (Eigen::Index k = 0; k < r.leak_se.cols(); ++k)
            os << "target_user," << t << ',' << k << ",leak_se,," << r.leak_se(t, k) << ",\n";
    os.precision(precision);
}

} // namespace cfisac
