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
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/optics.hpp"
#include "qsim/permanent.hpp"
#include "qsim/states.hpp"

namespace qsim {

/// Photon count cap for sums over the symmetric group S_n.
inline constexpr int kMaxExchangePhotons = 8;

/// Input/output occupation vectors r, s over the interferometer modes.
struct OccupationPattern {
    std::vector<int> input;   ///< r: photons per input mode
    std::vector<int> output;  ///< s: photons per output mode

    OccupationPattern(std::vector<int> r, std::vector<int> s)
        : input(std::move(r)), output(std::move(s)) {
        if (input.size() != output.size())
            throw DimensionError("input and output occupations must cover the same modes");
        long in = 0, out = 0;
        for (int v : input) {
            if (v < 0) throw DimensionError("occupations must be nonnegative");
            in += v;
        }
        for (int v : output) {
            if (v < 0) throw DimensionError("occupations must be nonnegative");
            out += v;
        }
        if (in != out || in < 1)
            throw DimensionError("occupation pattern must conserve n >= 1 photons");
    }

    int modes() const { return static_cast<int>(input.size()); }
    int total() const { return std::accumulate(input.begin(), input.end(), 0); }
};

/// All permutations of n elements (0-based image form), cached per n.
inline const std::vector<std::vector<int>>& permutations_of(int n) {
    if (n < 1 || n > kMaxExchangePhotons)
        throw CapacityError("permutation sums support 1 <= n <= 8 photons");
    static std::map<int, std::vector<std::vector<int>>> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) {
        std::vector<std::vector<int>> perms;
        std::vector<int> p(n);
        std::iota(p.begin(), p.end(), 0);
        do {
            perms.push_back(p);
        } while (std::next_permutation(p.begin(), p.end()));
        it = cache.emplace(n, std::move(perms)).first;
    }
    return it->second;
}

/// Effective scattering matrix M: rows of U repeated with input multiplicity,
/// columns with output multiplicity, both in ascending mode order.
inline Eigen::MatrixXcd effective_matrix(const Interferometer& u, const OccupationPattern& occ) {
    if (occ.modes() != u.modes())
        throw DimensionError("occupation pattern does not match interferometer mode count");
    const int n = occ.total();
    std::vector<int> rows, cols;
    rows.reserve(n);
    cols.reserve(n);
    for (int j = 0; j < occ.modes(); ++j)
        for (int k = 0; k < occ.input[j]; ++k) rows.push_back(j);
    for (int j = 0; j < occ.modes(); ++j)
        for (int k = 0; k < occ.output[j]; ++k) cols.push_back(j);
    Eigen::MatrixXcd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = u.entry(rows[i], cols[j]);
    return m;
}

/// One permutation's contribution to a transition probability.
struct ExchangeTerm {
    std::vector<int> permutation;   ///< rho as a 0-based image map
    std::vector<int> cycle_type;    ///< cycle lengths, descending
    Complex coefficient;            ///< perm(M * M^*_rho)
    Complex overlap_product;        ///< prod_j S_{j, rho_j}
    Complex value;                  ///< coefficient * overlap_product

    /// Cycle notation with 1-based photon indices, e.g. "(1,3)(2,4)"; "I" for
    /// the identity. Cycles start at their smallest element.
    std::string cycle_notation() const {
        const int n = static_cast<int>(permutation.size());
        std::vector<bool> seen(n, false);
        std::string out;
        for (int start = 0; start < n; ++start) {
            if (seen[start] || permutation[start] == start) {
                seen[start] = true;
                continue;
            }
            out += '(';
            int cur = start;
            bool first = true;
            while (!seen[cur]) {
                seen[cur] = true;
                if (!first) out += ',';
                out += std::to_string(cur + 1);
                first = false;
                cur = permutation[cur];
            }
            out += ')';
        }
        return out.empty() ? "I" : out;
    }
};

namespace detail {

inline std::vector<int> cycle_type_of(const std::vector<int>& perm) {
    const int n = static_cast<int>(perm.size());
    std::vector<bool> seen(n, false);
    std::vector<int> lengths;
    for (int i = 0; i < n; ++i) {
        if (seen[i]) continue;
        int len = 0, cur = i;
        while (!seen[cur]) {
            seen[cur] = true;
            ++len;
            cur = perm[cur];
        }
        lengths.push_back(len);
    }
    std::sort(lengths.rbegin(), lengths.rend());
    return lengths;
}

inline double occupation_normalization(const OccupationPattern& occ) {
    double denom = 1.0;
    for (int v : occ.input)
        for (int k = 2; k <= v; ++k) denom *= k;
    for (int v : occ.output)
        for (int k = 2; k <= v; ++k) denom *= k;
    return 1.0 / denom;
}

inline void check_gram_size(const OccupationPattern& occ, const DistinguishabilityMatrix& s) {
    if (s.size() != occ.total())
        throw DimensionError("distinguishability matrix size must equal the photon count");
    // photons sharing an input mode must be mutually indistinguishable: the
    // normalization 1/prod r_j! assumes their Gram block is all ones
    int offset = 0;
    for (int mode = 0; mode < occ.modes(); ++mode) {
        const int r = occ.input[mode];
        for (int i = offset; i < offset + r; ++i)
            for (int j = i + 1; j < offset + r; ++j)
                if (std::abs(s.entry(i, j) - Complex(1, 0)) > 1e-12)
                    throw InvalidGram(
                        "photons sharing input mode " + std::to_string(mode) +
                        " must have unit mutual overlap");
        offset += r;
    }
}

/// perm(M * conj(M) with rows permuted by rho), the permanent coefficient of
/// one exchange term.
inline Complex exchange_coefficient(const Eigen::MatrixXcd& m, const std::vector<int>& rho) {
    const int n = static_cast<int>(m.rows());
    Eigen::MatrixXcd b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = m(i, j) * std::conj(m(rho[i], j));
    return permanent_ryser(b);
}

}  // namespace detail

/// Transition probability for partially distinguishable photons,
///   P = N sum_rho [prod_j S_{j,rho_j}] perm(M * M^*_rho),
/// with N = 1 / prod_j r_j! s_j!. The Gram matrix S must be ordered like the
/// photons induced by the input occupations: ascending input mode, photons
/// sharing a mode adjacent (and mutually indistinguishable).
inline double transition_probability(const Interferometer& u, const OccupationPattern& occ,
                                     const DistinguishabilityMatrix& s) {
    detail::check_gram_size(occ, s);
    const int n = occ.total();
    const Eigen::MatrixXcd m = effective_matrix(u, occ);
    const auto& perms = permutations_of(n);

    // Kahan-compensated accumulation keeps the permutation sum reproducible
    // at the 1e-10 level independent of evaluation grouping.
    Complex sum(0, 0), comp(0, 0);
    for (const auto& rho : perms) {
        Complex w(1, 0);
        for (int j = 0; j < n; ++j) {
            w *= s.entry(j, rho[j]);
            if (w == Complex(0, 0)) break;
        }
        if (w == Complex(0, 0)) continue;
        const Complex term = w * detail::exchange_coefficient(m, rho);
        const Complex y = term - comp;
        const Complex t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const double norm = detail::occupation_normalization(occ);
    const double p = sum.real() * norm;
    if (std::abs(sum.imag()) * norm > 1e-10)
        throw Error("transition probability has a non-real residue");
    if (p < -1e-10 || p > 1.0 + 1e-10)
        throw Error("transition probability escaped [0, 1]");
    return std::clamp(p, 0.0, 1.0);
}

/// Full exchange decomposition: one term per permutation in S_n. The sum of
/// term values times the occupation normalization equals the transition
/// probability.
inline std::vector<ExchangeTerm> exchange_decomposition(const Interferometer& u,
                                                        const OccupationPattern& occ,
                                                        const DistinguishabilityMatrix& s) {
    detail::check_gram_size(occ, s);
    const int n = occ.total();
    const Eigen::MatrixXcd m = effective_matrix(u, occ);
    const double norm = detail::occupation_normalization(occ);
    std::vector<ExchangeTerm> terms;
    terms.reserve(permutations_of(n).size());
    for (const auto& rho : permutations_of(n)) {
        ExchangeTerm term;
        term.permutation = rho;
        term.cycle_type = detail::cycle_type_of(rho);
        term.coefficient = norm * detail::exchange_coefficient(m, rho);
        Complex w(1, 0);
        for (int j = 0; j < n; ++j) w *= s.entry(j, rho[j]);
        term.overlap_product = w;
        term.value = term.coefficient * term.overlap_product;
        terms.push_back(std::move(term));
    }
    return terms;
}

/// The closed-form fourfold coincidence probability for the experiment's
/// graph (injection order d, b, c, a into inputs 1-4; <a|c> = <b|d> = 0):
///   P_1111 = (1/32) (3 - r_ab^2 - r_bc^2 - r_cd^2 - r_ad^2
///            + (cos 2chi + 2)(r_ab^2 r_cd^2 + r_ad^2 r_bc^2)
///            + 2 (cos 2chi - 2) r_ab r_bc r_cd r_ad cos phi).
inline double closed_form_p1111(double r_ab, double r_bc, double r_cd, double r_ad,
                                double phi, double chi) {
    const double c2 = std::cos(2.0 * chi);
    return (3.0 - r_ab * r_ab - r_bc * r_bc - r_cd * r_cd - r_ad * r_ad +
            (c2 + 2.0) * (r_ab * r_ab * r_cd * r_cd + r_ad * r_ad * r_bc * r_bc) +
            2.0 * (c2 - 2.0) * r_ab * r_bc * r_cd * r_ad * std::cos(phi)) /
           32.0;
}

/// (max - min)/max visibility of closed_form_p1111 over phi at fixed chi,
/// with all four nonzero moduli equal to r. Maximum at phi = pi.
inline double closed_form_visibility(double r, double chi) {
    const double pmax = closed_form_p1111(r, r, r, r, kPi, chi);
    const double pmin = closed_form_p1111(r, r, r, r, 0.0, chi);
    return (pmax - pmin) / pmax;
}

/// Same visibility for chi averaged uniformly over [0, pi): cos 2chi -> 0.
inline double closed_form_visibility_uniform_chi(double r) {
    const double pmax = (3.0 - 4.0 * r * r + 2.0 * 2.0 * r * r * r * r +
                         2.0 * (-2.0) * r * r * r * r * (-1.0)) /
                        32.0;
    const double pmin = (3.0 - 4.0 * r * r + 2.0 * 2.0 * r * r * r * r +
                         2.0 * (-2.0) * r * r * r * r) /
                        32.0;
    return (pmax - pmin) / pmax;
}

/// The residual exchange contributions of the realized (non-ideal) states,
/// with |<t1|t2>| = |<t1|t3>| = 1/sqrt(2) substituted:
///   P2 = -(1/64) t23^2 (1 + cos theta)      (extra two-photon exchange)
///   P3 = +(1/64) t23   (1 + cos theta)      (extra three-photon exchanges)
///   P4 = -(1/256) (2 - cos 2chi) cos theta  (the four-photon exchange)
/// plus the contribution ratios R42 = (2 - cos 2chi)/(4 t23^2) and
/// R43 = -(2 - cos 2chi)/(4 t23).
struct ExtraContributions {
    double p2 = 0.0;
    double p3 = 0.0;
    double p4 = 0.0;
    double ratio42 = 0.0;  ///< R^(4/2)
    double ratio43 = 0.0;  ///< R^(4/3)
};

inline ExtraContributions extra_contributions(double t23_overlap, double chi, double theta) {
    if (t23_overlap < 0.0 || t23_overlap > 1.0)
        throw InvalidState("|<t2|t3>| must lie in [0, 1]");
    ExtraContributions out;
    const double shape = 1.0 + std::cos(theta);
    const double strength = 2.0 - std::cos(2.0 * chi);
    out.p2 = -t23_overlap * t23_overlap * shape / 64.0;
    out.p3 = t23_overlap * shape / 64.0;
    out.p4 = -strength * std::cos(theta) / 256.0;
    if (t23_overlap > 0.0) {
        out.ratio42 = strength / (4.0 * t23_overlap * t23_overlap);
        out.ratio43 = -strength / (4.0 * t23_overlap);
    }
    return out;
}

/// All output occupations with s_j >= 1 exactly on `clicked` and 0 elsewhere.
inline std::vector<std::vector<int>> output_patterns_for_clicks(int n, int modes,
                                                                const std::vector<int>& clicked) {
    std::vector<std::vector<int>> patterns;
    const int k = static_cast<int>(clicked.size());
    if (k == 0 || n < k) return patterns;
    std::vector<int> parts(k, 1);
    int remaining = n - k;
    // enumerate compositions by distributing the remaining photons
    std::vector<int> extra(k, 0);
    std::function<void(int, int)> rec = [&](int idx, int left) {
        if (idx == k - 1) {
            extra[idx] = left;
            std::vector<int> s(modes, 0);
            for (int i = 0; i < k; ++i) s[clicked[i]] = 1 + extra[i];
            patterns.push_back(std::move(s));
            return;
        }
        for (int take = 0; take <= left; ++take) {
            extra[idx] = take;
            rec(idx + 1, left - take);
        }
    };
    rec(0, remaining);
    return patterns;
}

/// Threshold-detector click probability: the chance that the detectors on
/// `clicked` all fire and no other detector does, for the given input
/// occupation and Gram matrix.
inline double click_probability(const Interferometer& u, const std::vector<int>& input_occ,
                                const DistinguishabilityMatrix& s,
                                const std::vector<int>& clicked) {
    const int m = u.modes();
    if (static_cast<int>(input_occ.size()) != m)
        throw DimensionError("input occupation does not match interferometer mode count");
    const int n = std::accumulate(input_occ.begin(), input_occ.end(), 0);
    if (n < 1) throw DimensionError("click_probability needs at least one photon");
    if (n > kMaxExchangePhotons) throw CapacityError("click_probability supports n <= 8");
    for (int c : clicked)
        if (c < 0 || c >= m) throw DimensionError("clicked output out of range");

    double total = 0.0;
    for (const auto& s_vec : output_patterns_for_clicks(n, m, clicked))
        total += transition_probability(u, OccupationPattern(input_occ, s_vec), s);
    return total;
}

}  // namespace qsim
