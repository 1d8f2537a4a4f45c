// Copyright 2026 The qsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/wavepackets.hpp"

namespace qsim {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Reduce an angle to the principal interval (-pi, pi].
inline double principal_angle(double x) {
    double r = std::remainder(x, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

/// Single-photon polarization spinor (H, V amplitudes), normalized.
struct PolarizationState {
    Complex h{1.0, 0.0};
    Complex v{0.0, 0.0};

    PolarizationState() = default;
    PolarizationState(Complex h_, Complex v_) : h(h_), v(v_) {
        const double norm = std::norm(h) + std::norm(v);
        if (std::abs(norm - 1.0) > 1e-12)
            throw InvalidState("polarization state is not normalized");
    }

    static PolarizationState horizontal() { return {}; }
    static PolarizationState vertical() { return {Complex(0, 0), Complex(1, 0)}; }
    static PolarizationState plus() {
        const double s = 1.0 / std::sqrt(2.0);
        return {Complex(s, 0), Complex(s, 0)};
    }
    /// (|H> + e^{i theta} |V>)/sqrt(2) — the equator of the Bloch sphere.
    static PolarizationState equatorial(double theta) {
        const double s = 1.0 / std::sqrt(2.0);
        return {Complex(s, 0), s * std::polar(1.0, theta)};
    }
};

inline Complex polarization_overlap(const PolarizationState& x, const PolarizationState& y) {
    return std::conj(x.h) * y.h + std::conj(x.v) * y.v;
}

/// Internal single-photon state: polarization spinor (x) temporal wavepacket.
struct PhotonState {
    PolarizationState polarization;
    GaussianWavepacket temporal;
    std::string label;
};

/// <x|y> = (polarization inner product) * (temporal inner product).
inline Complex overlap(const PhotonState& x, const PhotonState& y) {
    return polarization_overlap(x.polarization, y.polarization) *
           gaussian_overlap(x.temporal, y.temporal);
}

/// Hermitian Gram matrix S of pairwise internal-state overlaps.
///
/// Invariants enforced at construction: S = S^dagger (1e-12), unit diagonal
/// (1e-12), positive semidefinite (eigenvalues >= -1e-10).
class DistinguishabilityMatrix {
  public:
    explicit DistinguishabilityMatrix(Eigen::MatrixXcd entries) : s_(std::move(entries)) {
        if (s_.rows() != s_.cols() || s_.rows() < 1)
            throw DimensionError("distinguishability matrix must be square and non-empty");
        for (Eigen::Index i = 0; i < s_.rows(); ++i) {
            if (std::abs(s_(i, i) - Complex(1, 0)) > 1e-12)
                throw NonHermitianInput("distinguishability matrix diagonal must be 1");
            for (Eigen::Index j = i + 1; j < s_.cols(); ++j) {
                if (std::abs(s_(i, j) - std::conj(s_(j, i))) > 1e-12)
                    throw NonHermitianInput("distinguishability matrix is not Hermitian");
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw InvalidGram("distinguishability matrix is not positive semidefinite");
    }

    int size() const { return static_cast<int>(s_.rows()); }
    const Eigen::MatrixXcd& matrix() const { return s_; }
    Complex entry(int i, int j) const { return s_(i, j); }
    /// Edge weight modulus r_ij.
    double modulus(int i, int j) const { return std::abs(s_(i, j)); }
    /// Edge weight argument phi_ij.
    double argument(int i, int j) const { return std::arg(s_(i, j)); }

    static DistinguishabilityMatrix identity(int n) {
        return DistinguishabilityMatrix(Eigen::MatrixXcd::Identity(n, n));
    }
    static DistinguishabilityMatrix all_ones(int n) {
        return DistinguishabilityMatrix(Eigen::MatrixXcd::Ones(n, n));
    }

  private:
    Eigen::MatrixXcd s_;
};

/// Gram matrix of a state list: entries[i][j] = <states[i]|states[j]>.
/// The upper triangle is computed and mirrored so Hermiticity is exact.
inline DistinguishabilityMatrix gram_matrix(const std::vector<PhotonState>& states) {
    const int n = static_cast<int>(states.size());
    if (n < 1) throw DimensionError("gram_matrix needs at least one state");
    Eigen::MatrixXcd s(n, n);
    for (int i = 0; i < n; ++i) {
        s(i, i) = Complex(1, 0);
        const double self = std::abs(overlap(states[i], states[i]) - Complex(1, 0));
        if (self > 1e-12) throw InvalidState("photon state is not normalized");
        for (int j = i + 1; j < n; ++j) {
            s(i, j) = overlap(states[i], states[j]);
            s(j, i) = std::conj(s(i, j));
        }
    }
    return DistinguishabilityMatrix(std::move(s));
}

/// Default edge tolerance: a modulus below this is a missing graph edge.
inline constexpr double kEdgeTolerance = 1e-9;

/// Triad phase phi_ijk = arg S_ij + arg S_jk + arg S_ki, reduced to (-pi, pi].
/// Throws UndefinedPhase if any edge modulus is below tolerance.
inline double triad_phase(const DistinguishabilityMatrix& s, int i, int j, int k,
                          double tolerance = kEdgeTolerance) {
    const int edges[3][2] = {{i, j}, {j, k}, {k, i}};
    double sum = 0.0;
    for (const auto& e : edges) {
        if (s.modulus(e[0], e[1]) <= tolerance)
            throw UndefinedPhase("triad phase undefined: vanishing edge (" +
                                 std::to_string(e[0]) + "," + std::to_string(e[1]) + ")");
        sum += s.argument(e[0], e[1]);
    }
    return principal_angle(sum);
}

/// Four-particle phase phi_ijkl = arg sum around the 4-cycle i->j->k->l->i,
/// reduced to (-pi, pi].
inline double four_particle_phase(const DistinguishabilityMatrix& s, int i, int j, int k,
                                  int l, double tolerance = kEdgeTolerance) {
    const int edges[4][2] = {{i, j}, {j, k}, {k, l}, {l, i}};
    double sum = 0.0;
    for (const auto& e : edges) {
        if (s.modulus(e[0], e[1]) <= tolerance)
            throw UndefinedPhase("four-particle phase undefined: vanishing edge (" +
                                 std::to_string(e[0]) + "," + std::to_string(e[1]) + ")");
        sum += s.argument(e[0], e[1]);
    }
    return principal_angle(sum);
}

/// Timing/width configuration for the experiment's wavepackets.
struct WalkoffConfig {
    double sigma_ratio = 2.1;    ///< width of t1 relative to t2, t3
    double sigma_short = 1.0;    ///< width of t2 and t3 (sets the time unit)
    double t23_target = 0.1;     ///< target |<t2|t3>|
    double carrier = 0.0;        ///< common carrier frequency
    double t1_center = 0.0;      ///< arrival time of t1; t2, t3 sit symmetrically about it
};

namespace detail {

inline double equal_width_overlap_modulus(double delta, double sigma) {
    return std::exp(-delta * delta / (4.0 * sigma * sigma));
}

/// Solve |<t2|t3>|(delta) = target for the t2-t3 separation by bisection
/// (the modulus is strictly decreasing in delta). Tolerance 1e-10 in modulus.
inline double solve_walkoff_separation(double sigma, double target) {
    if (!(target > 0.0) || target > 1.0)
        throw InfeasibleTiming("target overlap must lie in (0, 1]");
    if (target == 1.0) return 0.0;
    double lo = 0.0, hi = sigma;
    while (equal_width_overlap_modulus(hi, sigma) > target) hi *= 2.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double val = equal_width_overlap_modulus(mid, sigma);
        if (std::abs(val - target) < 1e-10) return mid;
        (val > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// The four internal states of the experiment, plus their Gram matrix in
/// (a, b, c, d) order. In ideal (top-hat) mode only the Gram is available.
struct ExperimentStates {
    std::optional<std::array<PhotonState, 4>> states;  // a, b, c, d
    Eigen::MatrixXcd gram;                             // 4x4, (a, b, c, d) order
    bool ideal = false;

    DistinguishabilityMatrix gram_matrix() const { return DistinguishabilityMatrix(gram); }
};

/// Prepare (a, b, c, d) with Gaussian wavepackets: a = H (x) t1, b = + (x) t2,
/// c = V (x) t1, d = (H + e^{i theta} V)/sqrt(2) (x) t3. t2 and t3 are walked
/// off symmetrically about t1 until |<t2|t3>| hits the configured target; with
/// defaults this leaves |<t1|t2>| = |<t1|t3>| close to 1/sqrt(2).
inline ExperimentStates prepare_experiment_states(double theta,
                                                  const WalkoffConfig& timing = {}) {
    if (!(timing.sigma_ratio > 0.0) || !(timing.sigma_short > 0.0))
        throw InfeasibleTiming("wavepacket widths must be positive");
    const double sigma = timing.sigma_short;
    const double delta = detail::solve_walkoff_separation(sigma, timing.t23_target);
    const GaussianWavepacket t1(timing.t1_center, timing.sigma_ratio * sigma, timing.carrier);
    const GaussianWavepacket t2(timing.t1_center - 0.5 * delta, sigma, timing.carrier);
    const GaussianWavepacket t3(timing.t1_center + 0.5 * delta, sigma, timing.carrier);

    ExperimentStates out;
    out.states = {{
        {PolarizationState::horizontal(), t1, "a"},
        {PolarizationState::plus(), t2, "b"},
        {PolarizationState::vertical(), t1, "c"},
        {PolarizationState::equatorial(theta), t3, "d"},
    }};
    out.gram = qsim::gram_matrix({out.states->begin(), out.states->end()}).matrix();
    out.ideal = false;
    return out;
}

/// Top-hat idealization: overlap moduli are set directly instead of being
/// derived from Gaussian wavepackets. Defaults give the ideal graph with
/// r_ab = r_bc = r_cd = r_da = 1/2 and <a|c> = <b|d> = 0.
inline ExperimentStates prepare_ideal_states(double theta,
                                             double temporal_overlap = 1.0 / std::sqrt(2.0),
                                             double t23_overlap = 0.0) {
    ExperimentStates out;
    out.ideal = true;
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Identity(4, 4);
    const Complex ab = polarization_overlap(PolarizationState::horizontal(),
                                            PolarizationState::plus()) *
                       temporal_overlap;
    const Complex bc = polarization_overlap(PolarizationState::plus(),
                                            PolarizationState::vertical()) *
                       temporal_overlap;
    const Complex cd = polarization_overlap(PolarizationState::vertical(),
                                            PolarizationState::equatorial(theta)) *
                       temporal_overlap;
    const Complex da = polarization_overlap(PolarizationState::equatorial(theta),
                                            PolarizationState::horizontal()) *
                       temporal_overlap;
    const Complex bd = polarization_overlap(PolarizationState::plus(),
                                            PolarizationState::equatorial(theta)) *
                       t23_overlap;
    s(0, 1) = ab;
    s(1, 2) = bc;
    s(2, 3) = cd;
    s(3, 0) = da;
    s(1, 3) = bd;
    s(1, 0) = std::conj(s(0, 1));
    s(2, 1) = std::conj(s(1, 2));
    s(3, 2) = std::conj(s(2, 3));
    s(0, 3) = std::conj(s(3, 0));
    s(3, 1) = std::conj(s(1, 3));
    out.gram = std::move(s);
    return out;
}

}  // namespace qsim
