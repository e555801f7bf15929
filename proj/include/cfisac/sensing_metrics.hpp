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
#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cfisac/beamforming.hpp"
#include "cfisac/common.hpp"

namespace cfisac {

// ---------------------------------------------------------------------------
// Beampattern gains. The transmit gain is the symbol-averaged second moment
// E|a(theta)^H x|^2 = sum_k |a^H w_k|^2 + sum_t |a^H s_t|^2 for unit-power,
// mutually uncorrelated streams.

inline double tx_beampattern_gain(std::span<const CVector> beams, double theta) {
    if (beams.empty()) return 0.0;
    const CVector a = steering_vector(static_cast<std::size_t>(beams.front().size()), theta);
    double g = 0.0;
    for (const auto& b : beams) g += std::norm(a.dot(b));
    return g;
}

/// Every communication and sensing beam radiated by DL AP `ap`.
inline std::vector<CVector> ap_beams(const PrecoderSet& p, std::size_t ap) {
    std::vector<CVector> out;
    out.reserve(p.K() + p.T());
    for (std::size_t k = 0; k < p.K(); ++k) out.push_back(p.w(ap, k));
    for (std::size_t t = 0; t < p.T(); ++t) out.push_back(p.s(ap, t));
    return out;
}

inline double tx_beampattern_gain(const PrecoderSet& p, std::size_t ap, double theta) {
    return tx_beampattern_gain(ap_beams(p, ap), theta);
}

/// Instantaneous |a(theta)^H x|^2 for one realized transmit vector.
inline double tx_beampattern_gain_instantaneous(const CVector& x, double theta) {
    const CVector a = steering_vector(static_cast<std::size_t>(x.size()), theta);
    return std::norm(a.dot(x));
}

inline double rx_beampattern_gain(const CVector& u, double theta) {
    const CVector b = steering_vector(static_cast<std::size_t>(u.size()), theta);
    return std::norm(u.dot(b));
}

/// |u^H b(theta_rx)|^2 times the symbol-averaged transmit gain at theta_tx.
inline double combined_beampattern_gain(const CVector& u, double theta_rx, std::span<const CVector> beams,
                                        double theta_tx) {
    return rx_beampattern_gain(u, theta_rx) * tx_beampattern_gain(beams, theta_tx);
}

enum class BeampatternKind { transmit, receive, combined };

inline const char* to_string(BeampatternKind k) {
    switch (k) {
    case BeampatternKind::transmit: return "transmit";
    case BeampatternKind::receive: return "receive";
    case BeampatternKind::combined: return "combined";
    }
    return "?";
}

struct BeampatternProfile {
    std::size_t ap_index = 0;
    std::vector<double> angles_rad;
    std::vector<double> gains;
    BeampatternKind kind = BeampatternKind::transmit;
    /// Indices of local maxima, strongest first.
    std::vector<std::size_t> peaks;
};

/// `points` equally spaced angles covering [-pi/2, pi/2] inclusive.
inline std::vector<double> angle_grid(std::size_t points) {
    if (points < 2) throw std::invalid_argument("angle_grid: need at least two points");
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = -kPi / 2 + kPi * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

/// Local maxima of `gains` (plateaus report their first index), sorted by
/// decreasing gain; ties keep the lower index first.
inline std::vector<std::size_t> find_peaks(std::span<const double> gains) {
    std::vector<std::size_t> peaks;
    const std::size_t n = gains.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gains[i];
        if (g <= 0.0) continue;
        const bool left = i == 0 || g > gains[i - 1];
        std::size_t j = i;
        while (j + 1 < n && gains[j + 1] == g) ++j;
        const bool right = j + 1 == n || g > gains[j + 1];
        if (left && right) peaks.push_back(i);
        i = j;
    }
    std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });
    return peaks;
}

inline BeampatternProfile beampattern_profile(std::span<const CVector> beams, std::size_t ap,
                                              std::span<const double> grid) {
    BeampatternProfile prof;
    prof.ap_index = ap;
    prof.kind = BeampatternKind::transmit;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < -kPi / 2 - 1e-12 || grid[i] > kPi / 2 + 1e-12)
            throw std::invalid_argument("beampattern_profile: angle outside [-pi/2, pi/2]");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw std::invalid_argument("beampattern_profile: grid must be strictly increasing");
    }
    prof.angles_rad.assign(grid.begin(), grid.end());
    prof.gains.reserve(grid.size());
    for (double th : grid) prof.gains.push_back(tx_beampattern_gain(beams, th));
    prof.peaks = find_peaks(prof.gains);
    return prof;
}

inline BeampatternProfile beampattern_profile(const PrecoderSet& p, std::size_t ap, std::span<const double> grid) {
    return beampattern_profile(ap_beams(p, ap), ap, grid);
}

/// CSV with columns angle_deg,gain_linear,gain_db.
inline void write_beampattern_csv(std::ostream& os, const BeampatternProfile& prof) {
    const auto precision = os.precision(17);
    os << "angle_deg,gain_linear,gain_db\n";
    for (std::size_t i = 0; i < prof.angles_rad.size(); ++i) {
        const double g = prof.gains[i];
        os << rad_to_deg(prof.angles_rad[i]) << ',' << g << ',';
        if (g > 0.0) os << linear_to_db(g);
        else os << "-inf";
        os << '\n';
    }
    os.precision(precision);
}

// ---------------------------------------------------------------------------
// Mutual information of the echo observation Y = G X + Z.

namespace detail {

inline void require_psd(const CMatrix& R, const char* who) {
    if (R.rows() != R.cols()) throw std::invalid_argument(std::string(who) + ": R_G must be square");
    if (!R.isApprox(R.adjoint(), 1e-9) && (R - R.adjoint()).norm() > 1e-12)
        throw std::invalid_argument(std::string(who) + ": R_G must be Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(R, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale)
        throw std::invalid_argument(std::string(who) + ": R_G is not positive semi-definite");
}

} // namespace detail

/// antennas * log2 det(X^H R_G X / sigma^2 + I) in bits, X of shape
/// antennas x slots.
inline double sensing_mi(const CMatrix& X, const CMatrix& R_G, double sigma2, std::size_t antennas) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sensing_mi: sigma2 must be > 0");
    detail::require_psd(R_G, "sensing_mi");
    if (X.rows() != R_G.rows()) throw std::invalid_argument("sensing_mi: X rows must match R_G");
    const auto slots = X.cols();
    CMatrix A = X.adjoint() * R_G * X / sigma2;
    A = 0.5 * (A + A.adjoint()).eval();
    A += CMatrix::Identity(slots, slots);
    Eigen::LLT<CMatrix> llt(A);
    if (llt.info() != Eigen::Success) throw std::runtime_error("sensing_mi: log-det factorization failed");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < slots; ++i) logdet += 2.0 * std::log2(llt.matrixL()(i, i).real());
    return static_cast<double>(antennas) * logdet;
}

/// Sensing MI per slot, bps/Hz.
inline double sensing_mi_rate(const CMatrix& X, const CMatrix& R_G, double sigma2, std::size_t antennas) {
    if (X.cols() == 0) throw std::invalid_argument("sensing_mi_rate: X has no slots");
    return sensing_mi(X, R_G, sigma2, antennas) / static_cast<double>(X.cols());
}

// ---------------------------------------------------------------------------
// Fisher information and Cramer-Rao bounds for Y = G(theta) X + Z,
// Z ~ CN(0, sigma^2 I).

/// Noise-free echo G(theta) X as a function of a real parameter vector,
/// with an optional analytic Jacobian (one matrix per parameter).
struct ResponseModel {
    std::vector<std::string> params;
    std::function<CMatrix(const RVector&)> response;
    std::function<std::vector<CMatrix>(const RVector&)> jacobian;
};

struct FisherInfo {
    std::vector<std::string> params;
    RMatrix matrix;
    double condition_number = 0.0;
    bool ill_conditioned = false;
};

inline constexpr double kFisherConditionLimit = 1e12;

/// Point target G = alpha b(angle) a(angle)^H with parameters
/// (angle, Re alpha, Im alpha); X is tx_antennas x slots.
inline ResponseModel point_target_model(std::size_t rx_antennas, CMatrix X) {
    ResponseModel model;
    model.params = {"angle", "alpha_re", "alpha_im"};
    model.response = [rx_antennas, X](const RVector& th) -> CMatrix {
        const auto tx = static_cast<std::size_t>(X.rows());
        const Complex alpha(th[1], th[2]);
        const CVector a = steering_vector(tx, th[0]);
        const CVector b = steering_vector(rx_antennas, th[0]);
        return alpha * b * (a.adjoint() * X);
    };
    model.jacobian = [rx_antennas, X](const RVector& th) -> std::vector<CMatrix> {
        const auto tx = static_cast<std::size_t>(X.rows());
        const Complex alpha(th[1], th[2]);
        const CVector a = steering_vector(tx, th[0]);
        const CVector b = steering_vector(rx_antennas, th[0]);
        const CVector da = steering_vector_derivative(tx, th[0]);
        const CVector db = steering_vector_derivative(rx_antennas, th[0]);
        const Eigen::RowVectorXcd aX = a.adjoint() * X;
        const Eigen::RowVectorXcd daX = da.adjoint() * X;
        const CMatrix base = b * aX;
        return {alpha * (db * aX + b * daX), base, Complex(0.0, 1.0) * base};
    };
    return model;
}

/// Central finite-difference Jacobian of the model response.
inline std::vector<CMatrix> finite_difference_jacobian(const ResponseModel& model, const RVector& theta,
                                                       double rel_step = 1e-6) {
    std::vector<CMatrix> out;
    out.reserve(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(theta[i]));
        RVector lo = theta, hi = theta;
        lo[i] -= h;
        hi[i] += h;
        out.push_back((model.response(hi) - model.response(lo)) / (2.0 * h));
    }
    return out;
}

/// [F]_nm = (2 antennas / sigma^2) Re Tr(dGX/dtheta_n (dGX/dtheta_m)^H).
/// Uses the model's analytic Jacobian when present, finite differences
/// otherwise (or when `force_finite_difference`).
inline FisherInfo fim(const ResponseModel& model, const RVector& theta, double sigma2, std::size_t antennas,
                      bool force_finite_difference = false) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("fim: sigma2 must be > 0");
    if (static_cast<std::size_t>(theta.size()) != model.params.size())
        throw std::invalid_argument("fim: parameter vector size does not match the model");
    const auto J = (model.jacobian && !force_finite_difference) ? model.jacobian(theta)
                                                                 : finite_difference_jacobian(model, theta);
    const auto P = static_cast<Eigen::Index>(J.size());
    FisherInfo F;
    F.params = model.params;
    F.matrix.resize(P, P);
    const double c = 2.0 * static_cast<double>(antennas) / sigma2;
    for (Eigen::Index n = 0; n < P; ++n)
        for (Eigen::Index m = n; m < P; ++m) {
            // Re Tr(A B^H) = Re sum_ij A_ij conj(B_ij)
            const double v = c * (J[static_cast<std::size_t>(m)].conjugate().cwiseProduct(J[static_cast<std::size_t>(n)]))
                                     .sum()
                                     .real();
            F.matrix(n, m) = v;
            F.matrix(m, n) = v;
        }
    Eigen::SelfAdjointEigenSolver<RMatrix> es(F.matrix, Eigen::EigenvaluesOnly);
    const double lo = std::abs(es.eigenvalues().minCoeff());
    const double hi = std::abs(es.eigenvalues().maxCoeff());
    F.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    F.ill_conditioned = !(F.condition_number <= kFisherConditionLimit);
    return F;
}

/// [F^-1]_nn. Throws when F is singular, naming the parameters that span
/// the unidentifiable direction.
inline double crb(const FisherInfo& F, std::size_t n) {
    const auto P = F.matrix.rows();
    if (static_cast<Eigen::Index>(n) >= P) throw std::out_of_range("crb: parameter index out of range");
    if (F.ill_conditioned) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(F.matrix);
        const RVector null_dir = es.eigenvectors().col(0);
        std::string names;
        for (Eigen::Index i = 0; i < P; ++i)
            if (std::abs(null_dir[i]) > 1e-3) {
                if (!names.empty()) names += ", ";
                names += (static_cast<std::size_t>(i) < F.params.size() ? F.params[static_cast<std::size_t>(i)]
                                                                        : std::to_string(i));
            }
        throw std::domain_error("crb: Fisher information is singular along the direction of {" + names + "}");
    }
    return F.matrix.inverse()(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
}

inline std::vector<double> crb(const FisherInfo& F) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < F.matrix.rows(); ++i) out.push_back(crb(F, static_cast<std::size_t>(i)));
    return out;
}

} // namespace cfisac
