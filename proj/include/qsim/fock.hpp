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

// Brute-force Fock-space evolution over (spatial mode x internal mode) pairs.
// This is the validation oracle for the permanent-based engine: it is meant
// to be slow, simple, and to share nothing with scattering.hpp beyond the
// basic type definitions.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/optics.hpp"
#include "qsim/states.hpp"

namespace qsim::oracle {

inline constexpr int kMaxOraclePhotons = 6;
inline constexpr int kMaxOracleModes = 4;

/// Orthonormal expansion of a set of internal states: an n x d coefficient
/// matrix C with C C^dagger equal to the Gram matrix. Null directions of a
/// rank-deficient Gram are dropped.
struct OrthonormalBasis {
    int dimension = 0;
    Eigen::MatrixXcd coefficients;  // n x dimension
};

/// Pivoted Cholesky factorization of a PSD Gram matrix.
inline OrthonormalBasis orthonormalize_gram(const Eigen::MatrixXcd& gram,
                                            double rank_tolerance = 1e-12) {
    const int n = static_cast<int>(gram.rows());
    if (gram.cols() != n || n < 1) throw DimensionError("gram matrix must be square");
    Eigen::MatrixXcd work = gram;
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    int rank = 0;
    for (int k = 0; k < n; ++k) {
        int pivot = k;
        for (int i = k + 1; i < n; ++i)
            if (work(order[i], order[i]).real() > work(order[pivot], order[pivot]).real())
                pivot = i;
        std::swap(order[k], order[pivot]);
        const double diag = work(order[k], order[k]).real();
        if (diag <= rank_tolerance) break;
        const double root = std::sqrt(diag);
        c(order[k], k) = root;
        for (int i = k + 1; i < n; ++i) c(order[i], k) = work(order[i], order[k]) / root;
        for (int i = k + 1; i < n; ++i)
            for (int j = k + 1; j < n; ++j)
                work(order[i], order[j]) -= c(order[i], k) * std::conj(c(order[j], k));
        ++rank;
    }
    return {rank, c.leftCols(rank)};
}

/// Gram-factorize a list of photon states.
inline OrthonormalBasis orthonormalize_internal(const std::vector<PhotonState>& states) {
    return orthonormalize_gram(gram_matrix(states).matrix().eval());
}

/// Sparse amplitude map over joint (spatial x internal) occupation vectors.
class FockVector {
  public:
    using Key = std::string;  // one byte per joint mode

    explicit FockVector(int mode_count) : modes_(mode_count) {}

    static Key vacuum_key(int mode_count) {
        return Key(static_cast<std::size_t>(mode_count), '\0');
    }

    std::unordered_map<Key, Complex>& amplitudes() { return amp_; }
    const std::unordered_map<Key, Complex>& amplitudes() const { return amp_; }
    int modes() const { return modes_; }

    double norm() const {
        double n2 = 0.0;
        for (const auto& [key, a] : amp_) n2 += std::norm(a);
        return std::sqrt(n2);
    }

    void scale(double factor) {
        for (auto& [key, a] : amp_) a *= factor;
    }

    /// Apply a creation operator given as a coefficient vector over the joint
    /// modes: |psi> -> sum_j v_j b_j^dagger |psi>.
    FockVector apply_creation(const std::vector<Complex>& v) const {
        FockVector out(modes_);
        for (const auto& [key, a] : amp_) {
            for (int j = 0; j < modes_; ++j) {
                if (v[j] == Complex(0, 0)) continue;
                Key nk = key;
                const int occ = static_cast<unsigned char>(nk[j]);
                nk[j] = static_cast<char>(occ + 1);
                out.amp_[nk] += a * v[j] * std::sqrt(static_cast<double>(occ + 1));
            }
        }
        return out;
    }

  private:
    int modes_;
    std::unordered_map<Key, Complex> amp_;
};

namespace detail {

/// Bare (unnormalized) product of creation operators applied to vacuum,
/// optionally evolved through the interferometer. Port indices are 0-based
/// spatial modes; C is the n x d internal coefficient matrix. The physical
/// state is this vector divided by the norm of the *unevolved* build.
inline FockVector build_product_state(const Interferometer& u, const std::vector<int>& ports,
                                      const Eigen::MatrixXcd& c, bool evolve) {
    const int m = u.modes();
    const int n = static_cast<int>(ports.size());
    const int d = static_cast<int>(c.cols());
    if (static_cast<int>(c.rows()) != n)
        throw DimensionError("internal coefficient matrix must have one row per photon");
    if (n > kMaxOraclePhotons || m > kMaxOracleModes)
        throw CapacityError("fock oracle supports n <= 6 photons and m <= 4 modes");
    for (int p : ports)
        if (p < 0 || p >= m) throw DimensionError("input port out of range");

    const int joint = m * d;
    FockVector state(joint);
    state.amplitudes()[FockVector::vacuum_key(joint)] = Complex(1, 0);
    for (int k = 0; k < n; ++k) {
        std::vector<Complex> v(joint, Complex(0, 0));
        for (int mu = 0; mu < d; ++mu) {
            if (evolve) {
                for (int q = 0; q < m; ++q) v[q * d + mu] += u.entry(ports[k], q) * c(k, mu);
            } else {
                v[ports[k] * d + mu] += c(k, mu);
            }
        }
        state = state.apply_creation(v);
    }
    return state;
}

inline double input_norm(const Interferometer& u, const std::vector<int>& ports,
                         const Eigen::MatrixXcd& c) {
    const double raw = build_product_state(u, ports, c, false).norm();
    if (raw <= 1e-12) throw InvalidState("input photons span a null state");
    return raw;
}

inline std::vector<int> spatial_marginal(const FockVector::Key& key, int m, int d) {
    std::vector<int> s(m, 0);
    for (int q = 0; q < m; ++q)
        for (int mu = 0; mu < d; ++mu) s[q] += static_cast<unsigned char>(key[q * d + mu]);
    return s;
}

}  // namespace detail

/// Normalized input state (before the interferometer); exposed for tests.
inline FockVector input_state(const Interferometer& u, const std::vector<int>& ports,
                              const Eigen::MatrixXcd& internal_coefficients) {
    FockVector state = detail::build_product_state(u, ports, internal_coefficients, false);
    state.scale(1.0 / detail::input_norm(u, ports, internal_coefficients));
    return state;
}

/// Output state after the interferometer (spatial modes only), normalized by
/// the input norm so any unitarity defect is visible in the output norm.
inline FockVector output_state(const Interferometer& u, const std::vector<int>& ports,
                               const Eigen::MatrixXcd& internal_coefficients) {
    FockVector state = detail::build_product_state(u, ports, internal_coefficients, true);
    state.scale(1.0 / detail::input_norm(u, ports, internal_coefficients));
    return state;
}

/// Probability of the exact output occupation s (spatial), summed over all
/// internal-mode arrangements.
inline double probability_exact(const Interferometer& u, const std::vector<int>& ports,
                                const Eigen::MatrixXcd& internal_coefficients,
                                const std::vector<int>& s) {
    if (static_cast<int>(s.size()) != u.modes())
        throw DimensionError("output occupation does not match mode count");
    const FockVector out = output_state(u, ports, internal_coefficients);
    const int d = static_cast<int>(internal_coefficients.cols());
    double p = 0.0;
    for (const auto& [key, a] : out.amplitudes()) {
        if (detail::spatial_marginal(key, u.modes(), d) == s) p += std::norm(a);
    }
    return p;
}

/// Probability that exactly the detectors in `clicked` fire (threshold
/// detectors: they resolve presence, not photon number or internal mode).
inline double probability_clicks(const Interferometer& u, const std::vector<int>& ports,
                                 const Eigen::MatrixXcd& internal_coefficients,
                                 const std::vector<int>& clicked) {
    std::set<int> want(clicked.begin(), clicked.end());
    const FockVector out = output_state(u, ports, internal_coefficients);
    const int d = static_cast<int>(internal_coefficients.cols());
    double p = 0.0;
    for (const auto& [key, a] : out.amplitudes()) {
        const auto s = detail::spatial_marginal(key, u.modes(), d);
        std::set<int> support;
        for (int q = 0; q < u.modes(); ++q)
            if (s[q] > 0) support.insert(q);
        if (support == want) p += std::norm(a);
    }
    return p;
}

/// Convenience wrappers taking photon states directly.
inline double fock_probability(const Interferometer& u, const std::vector<int>& ports,
                               const std::vector<PhotonState>& states,
                               const std::vector<int>& exact_pattern) {
    return probability_exact(u, ports, orthonormalize_internal(states).coefficients,
                             exact_pattern);
}

inline double fock_click_probability(const Interferometer& u, const std::vector<int>& ports,
                                     const std::vector<PhotonState>& states,
                                     const std::vector<int>& clicked) {
    return probability_clicks(u, ports, orthonormalize_internal(states).coefficients, clicked);
}

}  // namespace qsim::oracle
