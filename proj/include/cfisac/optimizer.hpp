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
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfisac/beamforming.hpp"
#include "cfisac/channel.hpp"
#include "cfisac/common.hpp"
#include "cfisac/link_performance.hpp"
#include "cfisac/sensing_metrics.hpp"

namespace cfisac {

struct SolverTolerances {
    std::size_t max_iterations = 200;
    double relative_objective_change = 1e-4;
    double power_relative = 1e-6;
    double beampattern_relative = 1e-4;
    double leakage_bps_hz = 1e-4;
    std::size_t max_backtracks = 40;
};

/// Sum-SE design problem over one channel realization.
struct DesignProblem {
    ChannelSet channels;
    /// target_angles[m][t]: bearing of target t seen from DL AP m (radians).
    std::vector<std::vector<double>> target_angles;
    double gamma_th_watts = 0.0;
    double p_max_watts = 1.0;
    std::optional<double> delta_max_bps_hz;
    double noise_watts = 1.0;
    SolverTolerances tolerances;
    /// Extra starting points (e.g. the solution of a tighter problem); ones
    /// infeasible for this problem are skipped.
    std::vector<PrecoderSet> warm_starts;

    void validate() const {
        if (!(gamma_th_watts >= 0.0)) throw std::invalid_argument("DesignProblem: gamma_th must be >= 0");
        if (!(p_max_watts > 0.0)) throw std::invalid_argument("DesignProblem: p_max must be > 0");
        if (!(noise_watts > 0.0)) throw std::invalid_argument("DesignProblem: noise power must be > 0");
        if (delta_max_bps_hz && !(*delta_max_bps_hz >= 0.0))
            throw std::invalid_argument("DesignProblem: delta_max must be >= 0");
        if (target_angles.size() != channels.M())
            throw std::invalid_argument("DesignProblem: need one bearing list per DL AP");
        for (const auto& row : target_angles)
            if (row.size() != channels.T())
                throw std::invalid_argument("DesignProblem: need one bearing per target at every AP");
        if (channels.h.rows() != channels.M() || channels.g_dl.rows() != channels.M())
            throw std::invalid_argument("DesignProblem: channel set is incomplete");
    }
};

/// Raised when the constraints cannot be met; lists the offending constraints.
class InfeasibleProblem : public std::runtime_error {
public:
    explicit InfeasibleProblem(std::vector<std::string> violated)
        : std::runtime_error(message(violated)), violated_(std::move(violated)) {}
    const std::vector<std::string>& violated() const noexcept { return violated_; }

private:
    static std::string message(const std::vector<std::string>& v) {
        std::string s = "infeasible design problem; violated constraints:";
        for (const auto& c : v) s += " " + c;
        return s;
    }
    std::vector<std::string> violated_;
};

/// Signed slack of every constraint; negative means violated.
struct SlackTable {
    std::vector<double> power;  // per AP: p_max - P_m
    RMatrix beampattern;        // M x T: gain(theta_mt) - gamma_th
    RMatrix leakage;            // T x K: delta_max - leakage SE; empty without a cap

    /// Names of constraints violated beyond the problem tolerances.
    std::vector<std::string> violations(const DesignProblem& pb) const {
        const auto& tol = pb.tolerances;
        std::vector<std::string> out;
        for (std::size_t m = 0; m < power.size(); ++m)
            if (power[m] < -tol.power_relative * pb.p_max_watts) out.push_back("power[" + std::to_string(m) + "]");
        const double bp_tol = tol.beampattern_relative * std::max(pb.gamma_th_watts, 1e-300);
        for (Eigen::Index m = 0; m < beampattern.rows(); ++m)
            for (Eigen::Index t = 0; t < beampattern.cols(); ++t)
                if (beampattern(m, t) < -bp_tol)
                    out.push_back("beampattern[" + std::to_string(m) + "][" + std::to_string(t) + "]");
        for (Eigen::Index t = 0; t < leakage.rows(); ++t)
            for (Eigen::Index k = 0; k < leakage.cols(); ++k)
                if (leakage(t, k) < -tol.leakage_bps_hz)
                    out.push_back("leakage[" + std::to_string(t) + "][" + std::to_string(k) + "]");
        return out;
    }
    bool feasible(const DesignProblem& pb) const { return violations(pb).empty(); }
};

/// Exact slack of every constraint at `p`.
inline SlackTable feasibility_check(const PrecoderSet& p, const DesignProblem& pb) {
    const std::size_t M = pb.channels.M(), T = pb.channels.T();
    if (p.M() != M || p.T() != T || p.K() != pb.channels.K())
        throw std::invalid_argument("feasibility_check: precoder dimensions do not match the problem");
    SlackTable s;
    s.power.resize(M);
    s.beampattern.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(T));
    for (std::size_t m = 0; m < M; ++m) {
        s.power[m] = pb.p_max_watts - p.ap_power(m);
        const auto beams = ap_beams(p, m);
        for (std::size_t t = 0; t < T; ++t)
            s.beampattern(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(t)) =
                tx_beampattern_gain(beams, pb.target_angles[m][t]) - pb.gamma_th_watts;
    }
    if (pb.delta_max_bps_hz && T > 0) {
        const auto lt = leakage_se(pb.channels, p, pb.noise_watts);
        s.leakage = RMatrix::Constant(lt.se.rows(), lt.se.cols(), *pb.delta_max_bps_hz) - lt.se;
    }
    return s;
}

/// Per-user SE of one realization with unit-power symbols.
inline std::vector<double> instantaneous_se(const ChannelSet& ch, const PrecoderSet& p, double sigma2) {
    const std::size_t M = ch.M(), K = p.K(), T = p.T();
    std::vector<double> se(K);
    for (std::size_t k = 0; k < K; ++k) {
        double own = 0.0, total = sigma2;
        for (std::size_t i = 0; i < K; ++i) {
            Complex c{};
            for (std::size_t m = 0; m < M; ++m) c += ch.h(m, k).dot(p.w(m, i));
            total += std::norm(c);
            if (i == k) own = std::norm(c);
        }
        for (std::size_t t = 0; t < T; ++t) {
            Complex c{};
            for (std::size_t m = 0; m < M; ++m) c += ch.h(m, k).dot(p.s(m, t));
            total += std::norm(c);
        }
        se[k] = std::log2(total / (total - own));
    }
    return se;
}

inline double instantaneous_sum_se(const ChannelSet& ch, const PrecoderSet& p, double sigma2) {
    double s = 0.0;
    for (double v : instantaneous_se(ch, p, sigma2)) s += v;
    return s;
}

/// MRT (w = h, s = g_dl) scaled so each AP radiates exactly p_max.
inline PrecoderSet mrt_baseline(const DesignProblem& pb) {
    return scale_to_per_ap_power(mrt_precoders(pb.channels), pb.p_max_watts);
}

struct SolveReport {
    PrecoderSet precoders;
    std::vector<double> objective_trace;
    SlackTable feasibility;
    std::size_t iterations = 0;
    bool converged = false;
    double baseline_sum_se = 0.0;
    bool baseline_feasible = false;
    std::string start;  // name of the starting point the result grew from

    double sum_se() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

namespace detail {

/// Minimum-power steering beams s_mt = sqrt(p_t / L) a(theta_mt) meeting every
/// beampattern floor from the sensing beams alone. Returns the violated
/// constraints when the AP budget cannot carry them.
inline std::vector<std::string> steering_sensing_beams(const DesignProblem& pb, VectorGrid& s) {
    const std::size_t M = pb.channels.M(), T = pb.channels.T(), L = pb.channels.antennas;
    const double Ld = static_cast<double>(L);
    s = VectorGrid(M, T, CVector::Zero(static_cast<Eigen::Index>(L)));
    std::vector<std::string> violated;
    if (T == 0 || pb.gamma_th_watts == 0.0) return violated;
    for (std::size_t m = 0; m < M; ++m) {
        // |a_t^H a_l|^2 / L: gain at theta_t per unit power on the beam toward theta_l.
        RMatrix G(T, T);
        std::vector<CVector> a(T);
        for (std::size_t t = 0; t < T; ++t) a[t] = steering_vector(L, pb.target_angles[m][t]);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t l = 0; l < T; ++l)
                G(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) = std::norm(a[t].dot(a[l])) / Ld;
        const double gamma = pb.gamma_th_watts;
        std::vector<double> pw(T, gamma / Ld);
        auto total = [&] {
            double s = 0.0;
            for (double v : pw) s += v;
            return s;
        };
        if (total() > pb.p_max_watts) {
            // Shared illumination between nearby bearings: Gauss-Seidel on G p >= gamma.
            for (int sweep = 0; sweep < 200; ++sweep)
                for (std::size_t t = 0; t < T; ++t) {
                    double other = 0.0;
                    for (std::size_t l = 0; l < T; ++l)
                        if (l != t) other += G(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) * pw[l];
                    pw[t] = std::max(0.0, (gamma - other) / Ld);
                }
            for (std::size_t t = 0; t < T; ++t) {
                double g = 0.0;
                for (std::size_t l = 0; l < T; ++l) g += G(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l)) * pw[l];
                if (g < gamma) pw[t] += (gamma - g) / Ld;
            }
        }
        const bool over = total() > pb.p_max_watts * (1.0 + pb.tolerances.power_relative);
        for (std::size_t t = 0; t < T; ++t) {
            if (over || gamma > Ld * pb.p_max_watts)
                violated.push_back("beampattern[" + std::to_string(m) + "][" + std::to_string(t) + "]");
            s(m, t) = std::sqrt(pw[t] / Ld) * a[t];
        }
        if (over) violated.push_back("power[" + std::to_string(m) + "]");
    }
    return violated;
}

/// State of one projected-gradient run.
struct AscentState {
    PrecoderSet p;
    std::vector<double> budget;  // per-AP power available to w
    double objective = 0.0;
};

inline void project_to_budget(PrecoderSet& p, const std::vector<double>& budget) {
    for (std::size_t m = 0; m < p.M(); ++m) {
        double pw = 0.0;
        for (std::size_t k = 0; k < p.K(); ++k) pw += p.w(m, k).squaredNorm();
        if (pw > budget[m] && pw > 0.0) {
            const double c = std::sqrt(budget[m] / pw);
            for (std::size_t k = 0; k < p.K(); ++k) p.w(m, k) *= c;
        }
    }
}

/// d(sum SE)/d(conj w_mi), up to the positive factor 1/ln 2.
inline VectorGrid sum_se_gradient(const ChannelSet& ch, const PrecoderSet& p, double sigma2) {
    const std::size_t M = ch.M(), K = p.K(), T = p.T();
    CMatrix c(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    std::vector<double> inv_total(K), inv_interf(K);
    for (std::size_t k = 0; k < K; ++k) {
        double total = sigma2;
        for (std::size_t i = 0; i < K; ++i) {
            Complex v{};
            for (std::size_t m = 0; m < M; ++m) v += ch.h(m, k).dot(p.w(m, i));
            c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = v;
            total += std::norm(v);
        }
        for (std::size_t t = 0; t < T; ++t) {
            Complex v{};
            for (std::size_t m = 0; m < M; ++m) v += ch.h(m, k).dot(p.s(m, t));
            total += std::norm(v);
        }
        const double own = std::norm(c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
        inv_total[k] = 1.0 / total;
        inv_interf[k] = 1.0 / (total - own);
    }
    VectorGrid g(M, K);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t i = 0; i < K; ++i) {
            CVector acc = CVector::Zero(static_cast<Eigen::Index>(ch.antennas));
            for (std::size_t k = 0; k < K; ++k) {
                const double wgt = inv_total[k] - (i == k ? 0.0 : inv_interf[k]);
                acc += (wgt * c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i))) * ch.h(m, k);
            }
            g(m, i) = std::move(acc);
        }
    return g;
}

/// Orthonormal basis (ML x T) of the stacked DL target channels.
inline CMatrix target_subspace(const ChannelSet& ch) {
    const std::size_t M = ch.M(), T = ch.T();
    const auto L = static_cast<Eigen::Index>(ch.antennas);
    CMatrix G(static_cast<Eigen::Index>(M) * L, static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t m = 0; m < M; ++m) G.block(static_cast<Eigen::Index>(m) * L, static_cast<Eigen::Index>(t), L, 1) = ch.g_dl(m, t);
    Eigen::HouseholderQR<CMatrix> qr(G);
    const auto r = std::min(G.rows(), G.cols());
    return qr.householderQ() * CMatrix::Identity(G.rows(), r);
}

/// Removes from every stacked user vector its component in span(Q).
inline void project_out(VectorGrid& w, const CMatrix& Q, std::size_t L) {
    const std::size_t M = w.rows(), K = w.cols();
    const auto Li = static_cast<Eigen::Index>(L);
    for (std::size_t k = 0; k < K; ++k) {
        CVector v(static_cast<Eigen::Index>(M) * Li);
        for (std::size_t m = 0; m < M; ++m) v.segment(static_cast<Eigen::Index>(m) * Li, Li) = w(m, k);
        v -= Q * (Q.adjoint() * v);
        for (std::size_t m = 0; m < M; ++m) w(m, k) = v.segment(static_cast<Eigen::Index>(m) * Li, Li);
    }
}

struct RunResult {
    PrecoderSet p;
    std::vector<double> trace;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Monotone projected-gradient ascent from a feasible start. A trial point is
/// accepted only when the objective strictly improves and every constraint
/// holds; otherwise the step halves.
inline RunResult ascend(const DesignProblem& pb, AscentState st, const CMatrix* null_basis) {
    const auto& ch = pb.channels;
    const auto& tol = pb.tolerances;
    const std::size_t M = ch.M(), K = ch.K();
    const double leak_cap =
        pb.delta_max_bps_hz ? *pb.delta_max_bps_hz + 0.1 * tol.leakage_bps_hz : std::numeric_limits<double>::infinity();

    auto acceptable = [&](const PrecoderSet& p) {
        if (!pb.delta_max_bps_hz || ch.T() == 0) return true;
        const auto lt = leakage_se(ch, p, pb.noise_watts);
        for (double v : lt.max_per_target)
            if (v > leak_cap) return false;
        return true;
    };

    RunResult out;
    out.trace.push_back(st.objective);
    double total_budget = 0.0;
    for (double b : st.budget) total_budget += b;
    double step = -1.0;

    for (std::size_t it = 0; it < tol.max_iterations; ++it) {
        VectorGrid grad = sum_se_gradient(ch, st.p, pb.noise_watts);
        std::vector<VectorGrid> directions{grad};
        if (null_basis) {
            VectorGrid g2 = grad;
            project_out(g2, *null_basis, ch.antennas);
            directions.push_back(std::move(g2));
        }
        bool accepted = false;
        for (const auto& dir : directions) {
            double gnorm2 = 0.0;
            for (const auto& v : dir) gnorm2 += v.squaredNorm();
            if (!(gnorm2 > 0.0)) continue;
            if (step <= 0.0) step = 0.1 * std::sqrt(total_budget / gnorm2);
            double trial_step = step;
            for (std::size_t bt = 0; bt <= tol.max_backtracks; ++bt, trial_step *= 0.5) {
                PrecoderSet cand = st.p;
                for (std::size_t m = 0; m < M; ++m)
                    for (std::size_t k = 0; k < K; ++k) cand.w(m, k) += trial_step * dir(m, k);
                project_to_budget(cand, st.budget);
                const double f = instantaneous_sum_se(ch, cand, pb.noise_watts);
                if (!(f > st.objective) || !acceptable(cand)) continue;
                const double change = (f - st.objective) / std::max(std::abs(st.objective), 1e-300);
                st.p = std::move(cand);
                st.objective = f;
                out.trace.push_back(f);
                step = trial_step * 2.0;
                accepted = true;
                if (change < tol.relative_objective_change) out.converged = true;
                break;
            }
            if (accepted) break;
        }
        out.iterations = it + 1;
        if (!accepted) {
            out.converged = true;  // no ascent step found: stationary within the step limit
            break;
        }
        if (out.converged) break;
    }
    out.p = std::move(st.p);
    return out;
}

inline SolveReport solve(const DesignProblem& pb, bool secure) {
    pb.validate();
    const auto& ch = pb.channels;
    const std::size_t M = ch.M(), K = ch.K(), T = ch.T();

    VectorGrid sensing;
    if (auto bad = steering_sensing_beams(pb, sensing); !bad.empty()) throw InfeasibleProblem(std::move(bad));

    SolveReport rep;
    const PrecoderSet baseline = mrt_baseline(pb);
    rep.baseline_sum_se = instantaneous_sum_se(ch, baseline, pb.noise_watts);
    rep.baseline_feasible = feasibility_check(baseline, pb).feasible(pb);

    std::vector<double> budget(M);
    for (std::size_t m = 0; m < M; ++m) {
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t) s += sensing(m, t).squaredNorm();
        budget[m] = std::max(0.0, pb.p_max_watts - s);
    }

    struct Start {
        std::string name;
        AscentState state;
    };
    std::vector<Start> starts;
    auto add_start = [&](std::string name, PrecoderSet p, std::vector<double> b) {
        if (!feasibility_check(p, pb).feasible(pb)) return;
        AscentState st{std::move(p), std::move(b), 0.0};
        st.objective = instantaneous_sum_se(ch, st.p, pb.noise_watts);
        starts.push_back({std::move(name), std::move(st)});
    };

    // Restored MRT: w = h at the remaining per-AP budget, steering sensing beams.
    PrecoderSet mrt;
    mrt.w = ch.h;
    mrt.s = sensing;
    for (std::size_t m = 0; m < M; ++m) {
        double pw = 0.0;
        for (std::size_t k = 0; k < K; ++k) pw += mrt.w(m, k).squaredNorm();
        const double c = pw > 0.0 ? std::sqrt(budget[m] / pw) : 0.0;
        for (std::size_t k = 0; k < K; ++k) mrt.w(m, k) *= c;
    }
    add_start("mrt", mrt, budget);

    // MRT zero-forced against the stacked target channels, one common scale so
    // the nulls survive.
    std::optional<CMatrix> null_basis;
    if (T > 0 && K > 0 && M * ch.antennas > T) {
        null_basis = target_subspace(ch);
        PrecoderSet zf;
        zf.w = ch.h;
        zf.s = sensing;
        project_out(zf.w, *null_basis, ch.antennas);
        double c = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < M; ++m) {
            double pw = 0.0;
            for (std::size_t k = 0; k < K; ++k) pw += zf.w(m, k).squaredNorm();
            if (pw > 0.0) c = std::min(c, std::sqrt(budget[m] / pw));
        }
        if (std::isfinite(c)) {
            for (auto& v : zf.w) v *= c;
            add_start("target_null_mrt", zf, budget);
        }
    }

    add_start("mrt_baseline", baseline, [&] {
        std::vector<double> b(M);
        for (std::size_t m = 0; m < M; ++m) {
            double s = 0.0;
            for (std::size_t t = 0; t < T; ++t) s += baseline.s(m, t).squaredNorm();
            b[m] = std::max(0.0, pb.p_max_watts - s);
        }
        return b;
    }());

    for (std::size_t i = 0; i < pb.warm_starts.size(); ++i) {
        const PrecoderSet& p = pb.warm_starts[i];
        if (p.M() != M || p.K() != K || p.T() != T)
            throw std::invalid_argument("DesignProblem: warm start dimensions do not match");
        std::vector<double> b(M);
        for (std::size_t m = 0; m < M; ++m) {
            double s = 0.0;
            for (std::size_t t = 0; t < T; ++t) s += p.s(m, t).squaredNorm();
            b[m] = std::max(0.0, pb.p_max_watts - s);
        }
        add_start("warm_start_" + std::to_string(i), p, std::move(b));
    }

    if (secure && pb.delta_max_bps_hz) {
        // Largest common down-scaling of the restored MRT start that meets the
        // leakage cap (leakage SE is increasing in the scale).
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 60; ++i) {
            const double mid = 0.5 * (lo + hi);
            PrecoderSet p = mrt;
            for (auto& v : p.w) v *= mid;
            if (feasibility_check(p, pb).feasible(pb)) lo = mid;
            else hi = mid;
        }
        if (lo > 0.0 && lo < 1.0) {
            PrecoderSet p = mrt;
            for (auto& v : p.w) v *= lo;
            add_start("scaled_mrt", p, budget);
        }
    }

    if (starts.empty()) {
        // Sensing beams alone (w = 0) satisfy power and beampattern and leak nothing.
        PrecoderSet p;
        p.w = VectorGrid(M, K, CVector::Zero(static_cast<Eigen::Index>(ch.antennas)));
        p.s = sensing;
        add_start("sensing_only", p, budget);
        if (starts.empty()) throw InfeasibleProblem(feasibility_check(p, pb).violations(pb));
    }

    const CMatrix* nb = (secure && null_basis) ? &*null_basis : nullptr;
    bool have = false;
    for (auto& s : starts) {
        RunResult r = ascend(pb, s.state, nb);
        if (!have || r.trace.back() > rep.objective_trace.back()) {
            rep.precoders = std::move(r.p);
            rep.objective_trace = std::move(r.trace);
            rep.iterations = r.iterations;
            rep.converged = r.converged;
            rep.start = s.name;
            have = true;
        }
    }
    rep.feasibility = feasibility_check(rep.precoders, pb);
    return rep;
}

} // namespace detail

/// Maximizes the instantaneous sum SE subject to per-AP power caps and
/// transmit beampattern floors at every AP/target bearing.
///
/// Sensing beams are the minimum-power steering beams that meet the floors on
/// their own; the communication precoders are then refined by monotone
/// projected-gradient ascent from several feasible starts (MRT, target-nulled
/// MRT, full-power MRT baseline). Throws InfeasibleProblem when the floors do
/// not fit under the power cap.
inline SolveReport maximize_sum_se(DesignProblem problem) {
    problem.delta_max_bps_hz.reset();
    return detail::solve(problem, false);
}

/// As maximize_sum_se with the additional cap max_k leakage_se(t, k) <= delta_max
/// at every target. An infinite cap gives the unconstrained result.
inline SolveReport maximize_sum_se_secure(DesignProblem problem) {
    if (!problem.delta_max_bps_hz) throw std::invalid_argument("maximize_sum_se_secure: delta_max is not set");
    if (std::isinf(*problem.delta_max_bps_hz)) return maximize_sum_se(std::move(problem));
    return detail::solve(problem, true);
}

struct RelaxationChain {
    SolveReport unconstrained;  // gamma_th = 0, no leakage cap
    SolveReport beampattern;    // gamma_th floors, no leakage cap
    SolveReport secure;         // gamma_th floors and leakage cap
};

/// Solves the secure problem, then each relaxation warm-started from the
/// tighter solution, so the three sum SEs are ordered on the instance.
inline RelaxationChain solve_relaxation_chain(const DesignProblem& problem) {
    RelaxationChain c;
    c.secure = maximize_sum_se_secure(problem);
    DesignProblem bp = problem;
    bp.warm_starts.push_back(c.secure.precoders);
    c.beampattern = maximize_sum_se(bp);
    DesignProblem free = bp;
    free.gamma_th_watts = 0.0;
    free.warm_starts.push_back(c.beampattern.precoders);
    c.unconstrained = maximize_sum_se(free);
    return c;
}

inline nlohmann::json to_json_tree(const SolveReport& r) {
    nlohmann::json slack;
    slack["power"] = r.feasibility.power;
    auto matrix = [](const RMatrix& m) {
        nlohmann::json a = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
            a.push_back(row);
        }
        return a;
    };
    slack["beampattern"] = matrix(r.feasibility.beampattern);
    slack["leakage"] = matrix(r.feasibility.leakage);
    return {{"objective_trace", r.objective_trace},
            {"sum_se", r.sum_se()},
            {"baseline_sum_se", r.baseline_sum_se},
            {"baseline_feasible", r.baseline_feasible},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"start", r.start},
            {"slack", slack}};
}

/// CSV: iteration,sum_se.
inline void write_trace_csv(std::ostream& os, const SolveReport& r) {
    const auto precision = os.precision(17);
    os << "iteration,sum_se\n";
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i) os << i << ',' << r.objective_trace[i] << '\n';
    os.precision(precision);
}

} // namespace cfisac
