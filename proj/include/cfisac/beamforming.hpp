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

#include <cstdint>
#include <span>
#include <vector>

#include "cfisac/channel.hpp"
#include "cfisac/common.hpp"
#include "cfisac/random.hpp"

namespace cfisac {

/// Communication precoders, dedicated sensing beams and sensing combiners.
struct PrecoderSet {
    VectorGrid w;  // M x K
    VectorGrid s;  // M x T
    VectorGrid u;  // N x T, empty until combiners are attached
    double rho = 1.0;

    std::size_t M() const { return w.rows(); }
    std::size_t K() const { return w.cols(); }
    std::size_t T() const { return s.cols(); }

    /// Transmit power of AP m: sum_k |w_mk|^2 + sum_t |s_mt|^2.
    double ap_power(std::size_t m) const {
        double p = 0.0;
        for (std::size_t k = 0; k < w.cols(); ++k) p += w(m, k).squaredNorm();
        for (std::size_t t = 0; t < s.cols(); ++t) p += s(m, t).squaredNorm();
        return p;
    }
};

/// Data symbols of one slot plus optional stochastic sensing symbols.
struct SymbolBlock {
    std::vector<Complex> q;        // K unit-power data symbols
    std::vector<Complex> s_real;   // T sensing symbols; empty means deterministic beams
};

/// Unit-power QPSK symbols.
inline std::vector<Complex> qpsk_symbols(std::size_t count, Xoshiro256& rng) {
    static const double a = 1.0 / std::sqrt(2.0);
    std::vector<Complex> out(count);
    for (auto& q : out) {
        const auto bits = rng();
        q = {(bits & 1U) ? a : -a, (bits & 2U) ? a : -a};
    }
    return out;
}

/// Half-wavelength ULA response; element l is exp(j pi l sin(theta)).
inline CVector steering_vector(std::size_t L, double theta_rad) {
    if (L < 1) throw std::invalid_argument("steering_vector: L must be >= 1");
    CVector a(static_cast<Eigen::Index>(L));
    const double phase = kPi * std::sin(theta_rad);
    for (std::size_t l = 0; l < L; ++l) a[static_cast<Eigen::Index>(l)] = std::polar(1.0, phase * static_cast<double>(l));
    return a;
}

/// Derivative of steering_vector with respect to theta.
inline CVector steering_vector_derivative(std::size_t L, double theta_rad) {
    CVector a = steering_vector(L, theta_rad);
    const double c = kPi * std::cos(theta_rad);
    for (std::size_t l = 0; l < L; ++l) a[static_cast<Eigen::Index>(l)] *= Complex(0.0, c * static_cast<double>(l));
    return a;
}

/// MRT: w_mk = h_mk, s_mt = g_dl_mt, no normalization.
inline PrecoderSet mrt_precoders(const ChannelSet& ch) {
    PrecoderSet p;
    p.w = ch.h;
    p.s = ch.g_dl;
    return p;
}

/// MRC: u_nt = g_ul_nt.
inline VectorGrid mrc_combiners(const ChannelSet& ch) { return ch.g_ul; }

/// Per-AP transmit vectors x_m = sqrt(rho) sum_k w_mk q_k + sqrt(1 - rho) sum_t s_mt c_t,
/// where c_t = 1 for deterministic beams or the supplied sensing symbols.
/// With rho = 1 and both sums unweighted (`weighted = false`) this is the
/// plain superposition sum_k w_mk q_k + sum_t s_mt.
inline std::vector<CVector> isac_superposition(const PrecoderSet& p, const SymbolBlock& sym, double rho,
                                               bool weighted = true) {
    if (sym.q.size() != p.K()) throw std::invalid_argument("isac_superposition: symbol count != K");
    if (!sym.s_real.empty() && sym.s_real.size() != p.T())
        throw std::invalid_argument("isac_superposition: sensing symbol count != T");
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("isac_superposition: rho outside [0, 1]");
    const double cw = weighted ? std::sqrt(rho) : 1.0;
    const double cs = weighted ? std::sqrt(1.0 - rho) : 1.0;
    std::vector<CVector> x(p.M());
    for (std::size_t m = 0; m < p.M(); ++m) {
        Eigen::Index L = 0;
        if (p.K() > 0) L = p.w(m, 0).size();
        else if (p.T() > 0) L = p.s(m, 0).size();
        CVector xm = CVector::Zero(L);
        for (std::size_t k = 0; k < p.K(); ++k) xm += (cw * sym.q[k]) * p.w(m, k);
        for (std::size_t t = 0; t < p.T(); ++t) {
            const Complex c = sym.s_real.empty() ? Complex(1.0) : sym.s_real[t];
            xm += (cs * c) * p.s(m, t);
        }
        x[m] = std::move(xm);
    }
    return x;
}

/// Scales every AP whose power exceeds p_max_watts down to exactly p_max_watts.
/// APs within the cap and all-zero APs are left untouched.
inline PrecoderSet normalize_per_ap_power(PrecoderSet p, double p_max_watts) {
    if (!(p_max_watts > 0.0)) throw std::invalid_argument("normalize_per_ap_power: p_max must be > 0");
    for (std::size_t m = 0; m < p.M(); ++m) {
        const double pw = p.ap_power(m);
        if (pw <= p_max_watts || pw == 0.0) continue;
        const double c = std::sqrt(p_max_watts / pw);
        for (std::size_t k = 0; k < p.K(); ++k) p.w(m, k) *= c;
        for (std::size_t t = 0; t < p.T(); ++t) p.s(m, t) *= c;
    }
    return p;
}

/// Scales every non-zero AP to exactly p_watts (up or down).
inline PrecoderSet scale_to_per_ap_power(PrecoderSet p, double p_watts) {
    if (!(p_watts > 0.0)) throw std::invalid_argument("scale_to_per_ap_power: power must be > 0");
    for (std::size_t m = 0; m < p.M(); ++m) {
        const double pw = p.ap_power(m);
        if (pw == 0.0) continue;
        const double c = std::sqrt(p_watts / pw);
        for (std::size_t k = 0; k < p.K(); ++k) p.w(m, k) *= c;
        for (std::size_t t = 0; t < p.T(); ++t) p.s(m, t) *= c;
    }
    return p;
}

/// Per-AP amplitude-squared factors eta_m that give MRT an expected transmit
/// power of p_watts: eta_m = p / (L (sum_k zeta_h,mk + sum_t zeta_gdl,mt)).
inline std::vector<double> statistical_power_scaling(const LargeScaleGains& g, std::size_t L, double p_watts) {
    std::vector<double> eta(g.M());
    for (std::size_t m = 0; m < g.M(); ++m) {
        const double s = g.h.row(static_cast<Eigen::Index>(m)).sum() + g.g_dl.row(static_cast<Eigen::Index>(m)).sum();
        eta[m] = s > 0.0 ? p_watts / (static_cast<double>(L) * s) : 0.0;
    }
    return eta;
}

/// MRT with per-AP amplitude factors sqrt(eta_m) on both the communication
/// precoders and the sensing beams.
inline PrecoderSet scaled_mrt_precoders(const ChannelSet& ch, std::span<const double> eta) {
    if (eta.size() != ch.M()) throw std::invalid_argument("scaled_mrt_precoders: eta size != M");
    PrecoderSet p = mrt_precoders(ch);
    for (std::size_t m = 0; m < ch.M(); ++m) {
        const double a = std::sqrt(eta[m]);
        for (std::size_t k = 0; k < p.K(); ++k) p.w(m, k) *= a;
        for (std::size_t t = 0; t < p.T(); ++t) p.s(m, t) *= a;
    }
    return p;
}

} // namespace cfisac
