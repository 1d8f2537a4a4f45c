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
#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <numeric>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/states.hpp"

namespace qsim {

inline constexpr int kMaxPermanentSize = 12;

namespace detail {

inline void check_permanent_input(const Eigen::MatrixXcd& a) {
    if (a.rows() != a.cols()) throw DimensionError("permanent needs a square matrix");
    if (a.rows() < 1) throw DimensionError("permanent needs n >= 1");
    if (a.rows() > kMaxPermanentSize)
        throw CapacityError("permanent supports n <= 12");
}

}  // namespace detail

/// Reference permanent: the literal sum over all n! permutations.
/// Exponentially slower than ryser(); kept as an independent cross-check.
inline Complex permanent_naive(const Eigen::MatrixXcd& a) {
    detail::check_permanent_input(a);
    const int n = static_cast<int>(a.rows());
    std::vector<int> sigma(n);
    std::iota(sigma.begin(), sigma.end(), 0);
    Complex sum(0, 0);
    do {
        Complex prod(1, 0);
        for (int i = 0; i < n; ++i) prod *= a(i, sigma[i]);
        sum += prod;
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    return sum;
}

/// Ryser inclusion-exclusion permanent with Gray-code column updates, O(2^n n).
inline Complex permanent_ryser(const Eigen::MatrixXcd& a) {
    detail::check_permanent_input(a);
    const int n = static_cast<int>(a.rows());
    std::vector<Complex> row_sum(n, Complex(0, 0));
    Complex total(0, 0);
    std::uint32_t gray = 0;
    const std::uint32_t limit = 1u << n;
    for (std::uint32_t k = 1; k < limit; ++k) {
        const std::uint32_t next = k ^ (k >> 1);
        const std::uint32_t changed = next ^ gray;
        const int col = std::countr_zero(changed);
        const double sign_col = (next & changed) ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) row_sum[i] += sign_col * a(i, col);
        gray = next;

        Complex prod(1, 0);
        for (int i = 0; i < n; ++i) prod *= row_sum[i];
        const int bits = std::popcount(next);
        total += ((n - bits) % 2 == 0 ? 1.0 : -1.0) * prod;
    }
    return total;
}

/// Matrix permanent (Ryser engine).
inline Complex permanent(const Eigen::MatrixXcd& a) { return permanent_ryser(a); }

}  // namespace qsim
