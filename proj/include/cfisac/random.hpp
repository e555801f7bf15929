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
#include <initializer_list>
#include <limits>
#include <random>

#include "cfisac/common.hpp"

namespace cfisac {

/// splitmix64 step; advances `state` and returns the mixed output.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Labels the independent random streams drawn from one master seed.
enum class StreamKind : std::uint64_t {
    user_link = 1,   // DL AP m -> user k
    target_dl = 2,   // DL AP m -> target t
    target_ul = 3,   // target t -> UL AP n
    inter_ap = 4,    // DL AP m -> UL AP n
    placement = 5,
    shadowing = 6,
    trial = 7,
    symbols = 8,
    noise = 9,
    topology = 10,
};

/// Derives a child seed from a master seed and an index path.
///
/// Counter rule: the master seed and every path element are folded in order
/// through splitmix64, so the child for (kind, i, j) never depends on how many
/// other links exist.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t state = master;
    std::uint64_t out = splitmix64(state);
    for (std::uint64_t p : path) {
        state = out ^ (p * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
        out = splitmix64(state);
    }
    return out;
}

inline std::uint64_t derive_seed(std::uint64_t master, StreamKind kind, std::uint64_t i = 0,
                                 std::uint64_t j = 0) noexcept {
    return derive_seed(master, {static_cast<std::uint64_t>(kind), i, j});
}

/// xoshiro256** generator, satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
};

/// Source of circularly-symmetric complex Gaussian samples CN(0, 1).
class ComplexNormal {
public:
    explicit ComplexNormal(std::uint64_t seed) : rng_(seed), normal_(0.0, std::sqrt(0.5)) {}

    Complex operator()() {
        const double re = normal_(rng_);
        const double im = normal_(rng_);
        return {re, im};
    }

    /// Vector with i.i.d. CN(0, variance) entries.
    CVector vector(Eigen::Index n, double variance = 1.0) {
        const double a = std::sqrt(variance);
        CVector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = a * (*this)();
        return v;
    }

    CMatrix matrix(Eigen::Index rows, Eigen::Index cols, double variance = 1.0) {
        const double a = std::sqrt(variance);
        CMatrix m(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = a * (*this)();
        return m;
    }

    Xoshiro256& engine() noexcept { return rng_; }

private:
    Xoshiro256 rng_;
    std::normal_distribution<double> normal_;
};

} // namespace cfisac
