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
#include <istream>
#include <ostream>
#include <string>

#include "cfisac/common.hpp"
#include "cfisac/random.hpp"
#include "cfisac/scenario.hpp"

namespace cfisac {

/// Large-scale gains (path loss and shadowing) of every link.
struct LargeScaleGains {
    RMatrix h;     // M x K, DL AP -> user
    RMatrix g_dl;  // M x T, DL AP -> target
    RMatrix g_ul;  // N x T, target -> UL AP
    RMatrix f;     // M x N, DL AP -> UL AP

    std::size_t M() const { return static_cast<std::size_t>(h.rows()); }
    std::size_t K() const { return static_cast<std::size_t>(h.cols()); }
    std::size_t T() const { return static_cast<std::size_t>(g_dl.cols()); }
    std::size_t N() const { return static_cast<std::size_t>(g_ul.rows()); }

    /// Throws unless the tables have consistent shapes and every gain is
    /// positive and finite.
    void validate() const {
        auto positive = [](const RMatrix& m, const char* what) {
            for (Eigen::Index i = 0; i < m.size(); ++i)
                if (!(m.data()[i] > 0.0) || !std::isfinite(m.data()[i]))
                    throw std::invalid_argument(std::string("large-scale gain table '") + what +
                                                "' must be positive and finite");
        };
        if (g_dl.rows() != h.rows() || f.rows() != h.rows() || f.cols() != g_ul.rows() ||
            (g_ul.cols() != g_dl.cols() && g_ul.rows() > 0))
            throw std::invalid_argument("large-scale gain tables have inconsistent shapes");
        if (h.rows() == 0) throw std::invalid_argument("large-scale gains need at least one DL AP");
        positive(h, "h");
        positive(g_dl, "g_dl");
        positive(g_ul, "g_ul");
        positive(f, "f");
    }

    /// Gains where every link of a kind shares one value.
    static LargeScaleGains uniform(std::size_t M, std::size_t N, std::size_t K, std::size_t T, double zeta = 1.0) {
        LargeScaleGains g;
        g.h = RMatrix::Constant(M, K, zeta);
        g.g_dl = RMatrix::Constant(M, T, zeta);
        g.g_ul = RMatrix::Constant(N, T, zeta);
        g.f = RMatrix::Constant(M, N, zeta);
        return g;
    }
};

/// UMi gains of every link of `geo`, with optional log-normal shadowing
/// drawn from the geometry's seed.
inline LargeScaleGains large_scale_gains(const SystemGeometry& geo) {
    const auto& cfg = geo.config;
    const double fc = cfg.fc_hz;
    const std::size_t M = geo.dl_ap_positions.size();
    const std::size_t N = geo.ul_ap_positions.size();
    const std::size_t K = geo.user_positions.size();
    const std::size_t T = geo.targets.size();

    auto gain = [&](const Point& a, const Point& b, StreamKind kind, std::size_t i, std::size_t j) {
        double z = pathloss_linear(distance(a, b), fc);
        if (cfg.shadowing_std_db > 0.0) {
            Xoshiro256 rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(StreamKind::shadowing),
                                                  static_cast<std::uint64_t>(kind), i, j}));
            std::normal_distribution<double> n(0.0, cfg.shadowing_std_db);
            z *= db_to_linear(n(rng));
        }
        return z;
    };

    LargeScaleGains g;
    g.h.resize(M, K);
    g.g_dl.resize(M, T);
    g.g_ul.resize(N, T);
    g.f.resize(M, N);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k < K; ++k)
            g.h(m, k) = gain(geo.dl_ap_positions[m], geo.user_positions[k], StreamKind::user_link, m, k);
        for (std::size_t t = 0; t < T; ++t)
            g.g_dl(m, t) = gain(geo.dl_ap_positions[m], geo.targets[t].position, StreamKind::target_dl, m, t);
        for (std::size_t n = 0; n < N; ++n)
            g.f(m, n) = gain(geo.dl_ap_positions[m], geo.ul_ap_positions[n], StreamKind::inter_ap, m, n);
    }
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < T; ++t)
            g.g_ul(n, t) = gain(geo.ul_ap_positions[n], geo.targets[t].position, StreamKind::target_ul, n, t);
    return g;
}

/// Which link kinds a sampler should draw. Inter-AP matrices dominate the
/// cost and are only needed to exercise direct-link interference removal.
struct ChannelKinds {
    bool users = true;
    bool targets_dl = true;
    bool targets_ul = true;
    bool inter_ap = true;
};

/// One Rayleigh-faded realization of every link: a = sqrt(zeta) * CN(0, I).
struct ChannelSet {
    std::size_t antennas = 0;
    VectorGrid h;     // M x K
    VectorGrid g_dl;  // M x T
    VectorGrid g_ul;  // N x T
    Grid<CMatrix> f;  // M x N, each L x L
    LargeScaleGains zeta;

    std::size_t M() const { return zeta.M(); }
    std::size_t N() const { return zeta.N(); }
    std::size_t K() const { return zeta.K(); }
    std::size_t T() const { return zeta.T(); }
};

/// Draws one realization. Each link has its own child stream keyed by
/// (link kind, first index, second index), so the draw of a link depends only
/// on the seed and its indices.
inline ChannelSet sample_channels(const LargeScaleGains& gains, std::size_t antennas, std::uint64_t seed,
                                  const ChannelKinds& kinds = {}) {
    gains.validate();
    if (antennas < 1) throw std::invalid_argument("sample_channels: antennas must be >= 1");
    const auto L = static_cast<Eigen::Index>(antennas);
    const std::size_t M = gains.M(), N = gains.N(), K = gains.K(), T = gains.T();

    ChannelSet ch;
    ch.antennas = antennas;
    ch.zeta = gains;
    ch.h = VectorGrid(M, K);
    ch.g_dl = VectorGrid(M, T);
    ch.g_ul = VectorGrid(N, T);
    ch.f = Grid<CMatrix>(kinds.inter_ap ? M : 0, kinds.inter_ap ? N : 0);

    for (std::size_t m = 0; m < M; ++m) {
        if (kinds.users)
            for (std::size_t k = 0; k < K; ++k) {
                ComplexNormal cn(derive_seed(seed, StreamKind::user_link, m, k));
                ch.h(m, k) = cn.vector(L, gains.h(m, k));
            }
        if (kinds.targets_dl)
            for (std::size_t t = 0; t < T; ++t) {
                ComplexNormal cn(derive_seed(seed, StreamKind::target_dl, m, t));
                ch.g_dl(m, t) = cn.vector(L, gains.g_dl(m, t));
            }
        if (kinds.inter_ap)
            for (std::size_t n = 0; n < N; ++n) {
                ComplexNormal cn(derive_seed(seed, StreamKind::inter_ap, m, n));
                ch.f(m, n) = cn.matrix(L, L, gains.f(m, n));
            }
    }
    if (kinds.targets_ul)
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < T; ++t) {
                ComplexNormal cn(derive_seed(seed, StreamKind::target_ul, n, t));
                ch.g_ul(n, t) = cn.vector(L, gains.g_ul(n, t));
            }
    return ch;
}

inline ChannelSet sample_channels(const SystemGeometry& geo, std::uint64_t seed, const ChannelKinds& kinds = {}) {
    return sample_channels(large_scale_gains(geo), geo.config.L, seed, kinds);
}

/// Normalized-gain statistics of an i.i.d. Rayleigh vector.
struct HardeningStats {
    std::size_t n_antennas = 0;
    double mean_cv = 0.0;  // sample mean of |h|^2 / E|h|^2
    double var_cv = 0.0;   // unbiased sample variance of the same
    std::size_t trials = 0;
};

/// Draws h ~ CN(0, beta I_L) `trials` times and summarizes |h|^2 / (beta L).
inline HardeningStats hardening_stats(std::size_t L, double beta, std::size_t trials, std::uint64_t seed) {
    if (L < 1 || !(beta > 0.0) || trials < 2)
        throw std::invalid_argument("hardening_stats: need L >= 1, beta > 0, trials >= 2");
    ComplexNormal cn(derive_seed(seed, StreamKind::trial, 0));
    const double norm = beta * static_cast<double>(L);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < trials; ++i) {
        const double x = cn.vector(static_cast<Eigen::Index>(L), beta).squaredNorm() / norm;
        const double d = x - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (x - mean);
    }
    return {L, mean, m2 / static_cast<double>(trials - 1), trials};
}

struct FavorablePropagationStats {
    Complex mean;           // sample mean of the normalized inner product
    double mean_abs2 = 0.0; // sample mean of its squared modulus
    double var = 0.0;       // sample variance of the squared modulus
    std::size_t trials = 0;
};

/// Statistics of h_k^H h_l / sqrt(E|h_k|^2 E|h_l|^2) for independent
/// h_k ~ CN(0, beta_k I_L), h_l ~ CN(0, beta_l I_L).
inline FavorablePropagationStats favorable_propagation_stats(std::size_t L, double beta_k, double beta_l,
                                                             std::size_t trials, std::uint64_t seed) {
    if (L < 1 || !(beta_k > 0.0) || !(beta_l > 0.0) || trials < 2)
        throw std::invalid_argument("favorable_propagation_stats: need L >= 1, betas > 0, trials >= 2");
    ComplexNormal a(derive_seed(seed, StreamKind::trial, 1));
    ComplexNormal b(derive_seed(seed, StreamKind::trial, 2));
    const auto n = static_cast<Eigen::Index>(L);
    const double norm = std::sqrt(beta_k * beta_l) * static_cast<double>(L);
    Complex mean{};
    double mean2 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < trials; ++i) {
        const CVector hk = a.vector(n, beta_k);
        const CVector hl = b.vector(n, beta_l);
        const Complex z = hk.dot(hl) / norm;  // dot() conjugates the left operand
        const double x = std::norm(z);
        const double w = 1.0 / static_cast<double>(i + 1);
        mean += (z - mean) * w;
        const double d = x - mean2;
        mean2 += d * w;
        m2 += d * (x - mean2);
    }
    return {mean, mean2, m2 / static_cast<double>(trials - 1), trials};
}

// ---------------------------------------------------------------------------
// Text dump for fixtures.
//
// Layout:
//   cfisac-channels 1
//   M N K T L
//   <section> <rows> <cols>          for section in h g_dl g_ul f
//   <re> <im> ...                     one line per link, row-major over
//                                     (row, col); matrices are row-major too
// Values use 17 significant digits so a dump round-trips exactly.

inline void write_channel_set(std::ostream& os, const ChannelSet& ch) {
    const auto precision = os.precision(17);
    os << "cfisac-channels 1\n"
       << ch.M() << ' ' << ch.N() << ' ' << ch.K() << ' ' << ch.T() << ' ' << ch.antennas << '\n';
    auto vectors = [&](const char* name, const VectorGrid& g) {
        os << name << ' ' << g.rows() << ' ' << g.cols() << '\n';
        for (const auto& v : g) {
            for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i].real() << ' ' << v[i].imag();
            os << '\n';
        }
    };
    vectors("h", ch.h);
    vectors("g_dl", ch.g_dl);
    vectors("g_ul", ch.g_ul);
    os << "f " << ch.f.rows() << ' ' << ch.f.cols() << '\n';
    for (const auto& mat : ch.f) {
        bool first = true;
        for (Eigen::Index r = 0; r < mat.rows(); ++r)
            for (Eigen::Index c = 0; c < mat.cols(); ++c) {
                os << (first ? "" : " ") << mat(r, c).real() << ' ' << mat(r, c).imag();
                first = false;
            }
        os << '\n';
    }
    os.precision(precision);
}

/// Reads a dump written by write_channel_set. Large-scale gains are not part
/// of the dump and come back as ones.
inline ChannelSet read_channel_set(std::istream& is) {
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "cfisac-channels" || version != 1)
        throw std::runtime_error("read_channel_set: bad header");
    std::size_t M, N, K, T, L;
    if (!(is >> M >> N >> K >> T >> L)) throw std::runtime_error("read_channel_set: bad dimensions");
    ChannelSet ch;
    ch.antennas = L;
    ch.zeta = LargeScaleGains::uniform(M, N, K, T);
    const auto n = static_cast<Eigen::Index>(L);
    auto section = [&](const char* expect, std::size_t rows, std::size_t cols) {
        std::string name;
        std::size_t r, c;
        if (!(is >> name >> r >> c) || name != expect || r != rows || c != cols)
            throw std::runtime_error(std::string("read_channel_set: bad section header, expected ") + expect);
    };
    auto value = [&]() {
        double re, im;
        if (!(is >> re >> im)) throw std::runtime_error("read_channel_set: truncated data");
        return Complex(re, im);
    };
    auto vectors = [&](const char* name, std::size_t rows, std::size_t cols) {
        section(name, rows, cols);
        VectorGrid g(rows, cols);
        for (auto& v : g) {
            v.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) v[i] = value();
        }
        return g;
    };
    ch.h = vectors("h", M, K);
    ch.g_dl = vectors("g_dl", M, T);
    ch.g_ul = vectors("g_ul", N, T);
    std::string name;
    std::size_t fr, fc;
    if (!(is >> name >> fr >> fc) || name != "f" || !((fr == M && fc == N) || (fr == 0 && fc == 0)))
        throw std::runtime_error("read_channel_set: bad section header, expected f");
    ch.f = Grid<CMatrix>(fr, fc);
    for (auto& mat : ch.f) {
        mat.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < n; ++c) mat(r, c) = value();
    }
    return ch;
}

} // namespace cfisac
