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

// Two-source SPDC model. Source A emits the (b, c) pair into quitter inputs
// 2 and 3; source B emits (d, a) into inputs 1 and 4. After Pancharatnam
// phase averaging the input is a classical mixture of emission events.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/scattering.hpp"
#include "qsim/states.hpp"

namespace qsim {

// State ids in (a, b, c, d) order, matching ExperimentStates.
enum StateId : int { kStateA = 0, kStateB = 1, kStateC = 2, kStateD = 3 };

/// Which state each quitter input carries (0-based input modes 0..3 are
/// inputs 1..4): d -> 1, b -> 2, c -> 3, a -> 4. This injection order
/// maximizes the four-photon signal visibility.
inline constexpr std::array<int, 4> kPortState = {kStateD, kStateB, kStateC, kStateA};

/// Source and loss parameters.
struct SourceConfig {
    double lambda = 0.16;                      ///< squeezing parameter per source
    std::array<double, 4> eta_in = {0.598, 0.570, 0.570, 0.598};  ///< input transmissions
    std::array<double, 4> eta_out = {1.0, 1.0, 1.0, 1.0};         ///< output transmissions
    double spectral_factor = 0.95;             ///< multiplicative degradation of r_ij^2
    int max_total_photons = 6;                 ///< emission cap (photons, both sources)
    bool spectral_cross_source_only = false;   ///< restrict degradation to cross-source pairs

    void validate() const {
        if (lambda < 0.0 || lambda >= 1.0) throw InvalidState("lambda must lie in [0, 1)");
        for (double e : eta_in)
            if (e < 0.0 || e > 1.0) throw InvalidState("input transmissions must lie in [0, 1]");
        for (double e : eta_out)
            if (e < 0.0 || e > 1.0) throw InvalidState("output transmissions must lie in [0, 1]");
        if (spectral_factor < 0.0 || spectral_factor > 1.0)
            throw InvalidState("spectral_factor must lie in [0, 1]");
        if (max_total_photons < 4 || max_total_photons % 2 != 0)
            throw InvalidState("max_total_photons must be an even number >= 4");
    }
};

/// P(n pairs) = (1 - lambda^2) lambda^{2n} for a two-mode squeezed vacuum.
inline double tmsv_pair_probability(double lambda, int n_pairs) {
    if (lambda < 0.0 || lambda >= 1.0) throw InvalidState("lambda must lie in [0, 1)");
    if (n_pairs < 0) throw InvalidState("pair count must be nonnegative");
    return (1.0 - lambda * lambda) * std::pow(lambda, 2 * n_pairs);
}

/// Factor relating a blocked-source background measurement to its in-situ
/// weight: blocking raises the other source's "did not fire" probability from
/// (1 - lambda^2) to 1, so measured = in_situ * 1/(1 - lambda^2).
inline double measured_background_scale(double lambda) {
    if (lambda < 0.0 || lambda >= 1.0) throw InvalidState("lambda must lie in [0, 1)");
    return 1.0 / (1.0 - lambda * lambda);
}

/// Double-emission fourfold coincidence probability (one source firing twice):
/// (1/32) (3 - 4 r^2 + r^4 (2 + cos 2chi)).
inline double double_emission_p1111(double r, double chi) {
    if (r < 0.0 || r > 1.0) throw InvalidState("overlap modulus must lie in [0, 1]");
    const double r2 = r * r;
    return (3.0 - 4.0 * r2 + r2 * r2 * (2.0 + std::cos(2.0 * chi))) / 32.0;
}

/// One emission event of the mixture: a firing pattern, the photons it puts
/// into the quitter (0-based input mode + state id each, ascending by mode),
/// and its preparation weight (firing probability times input transmissions).
struct EmissionEvent {
    std::string firing;       ///< "AB", "AA", "BB", "AAB", "ABB", "AAA", "BBB"
    int pairs_a = 0;          ///< pairs emitted by source A
    int pairs_b = 0;          ///< pairs emitted by source B
    std::vector<int> ports;   ///< 0-based input modes, ascending
    std::vector<int> states;  ///< state id per photon, aligned with ports
    double weight = 0.0;
};

namespace detail {

inline std::string firing_name(int pairs_a, int pairs_b) {
    std::string name(static_cast<std::size_t>(pairs_a), 'A');
    name.append(static_cast<std::size_t>(pairs_b), 'B');
    return name;
}

/// Photons put into the open inputs when source A fires pairs_a times and
/// source B pairs_b times, with the complement of `open_mask` shuttered.
/// Bit i of open_mask is input mode i. A fully shuttered source is
/// marginalized: pass relevant=false and pairs=0, which contributes weight 1
/// instead of its vacuum probability.
inline EmissionEvent make_event(const SourceConfig& cfg, int pairs_a, int pairs_b,
                                bool relevant_a, bool relevant_b, unsigned open_mask) {
    EmissionEvent ev;
    ev.firing = firing_name(pairs_a, pairs_b);
    ev.pairs_a = pairs_a;
    ev.pairs_b = pairs_b;
    ev.weight = (relevant_a ? tmsv_pair_probability(cfg.lambda, pairs_a) : 1.0) *
                (relevant_b ? tmsv_pair_probability(cfg.lambda, pairs_b) : 1.0);
    for (int mode = 0; mode < 4; ++mode) {
        if (!(open_mask & (1u << mode))) continue;
        const int from_a = (mode == 1 || mode == 2) ? pairs_a : 0;
        const int from_b = (mode == 0 || mode == 3) ? pairs_b : 0;
        for (int k = 0; k < from_a + from_b; ++k) {
            ev.ports.push_back(mode);
            ev.states.push_back(kPortState[mode]);
            ev.weight *= cfg.eta_in[mode];
        }
    }
    return ev;
}

}  // namespace detail

/// All emission events that can reach the open inputs. The photon cap applies
/// to the sources that can deliver photons; a fully shuttered source is
/// marginalized out exactly, so a blocked-source background measurement
/// relates to its in-situ weight by measured_background_scale(lambda).
/// Events that deliver no photons are omitted.
inline std::vector<EmissionEvent> emission_events_for_shutters(const SourceConfig& cfg,
                                                               unsigned open_mask) {
    cfg.validate();
    const int max_pairs = cfg.max_total_photons / 2;
    const bool relevant_a = (open_mask & 0b0110u) != 0;
    const bool relevant_b = (open_mask & 0b1001u) != 0;
    const int cap_a = relevant_a ? max_pairs : 0;
    const int cap_b = relevant_b ? max_pairs : 0;
    std::vector<EmissionEvent> events;
    for (int a = 0; a <= cap_a; ++a) {
        for (int b = 0; b <= cap_b; ++b) {
            if (a == 0 && b == 0) continue;
            if ((relevant_a ? a : 0) + (relevant_b ? b : 0) > max_pairs) continue;
            EmissionEvent ev = detail::make_event(cfg, a, b, relevant_a, relevant_b, open_mask);
            if (ev.ports.empty()) continue;
            events.push_back(std::move(ev));
        }
    }
    return events;
}

/// The classical post-averaging mixture for the all-open experiment,
/// restricted to events that can produce fourfold coincidences (>= 4 photons
/// delivered): AB, AA, BB plus the six-photon firings under the default cap.
inline std::vector<EmissionEvent> emission_mixture(const SourceConfig& cfg) {
    std::vector<EmissionEvent> events;
    for (auto& ev : emission_events_for_shutters(cfg, 0xF)) {
        if (ev.ports.size() >= 4) events.push_back(std::move(ev));
    }
    return events;
}

/// Degrade pairwise distinguishabilities by the spectral factor: every
/// off-diagonal r_ij^2 is multiplied by `factor` (each modulus by its square
/// root). With cross_source_only, the same-source pairs (b,c) and (a,d) are
/// left untouched.
inline Eigen::MatrixXcd apply_spectral_factor(Eigen::MatrixXcd gram, double factor,
                                              bool cross_source_only = false) {
    const double scale = std::sqrt(factor);
    auto same_source = [](int i, int j) {
        const bool a_pair = (i == kStateB && j == kStateC) || (i == kStateC && j == kStateB);
        const bool b_pair = (i == kStateA && j == kStateD) || (i == kStateD && j == kStateA);
        return a_pair || b_pair;
    };
    for (int i = 0; i < gram.rows(); ++i)
        for (int j = 0; j < gram.cols(); ++j) {
            if (i == j) continue;
            if (cross_source_only && same_source(i, j)) continue;
            gram(i, j) *= scale;
        }
    return gram;
}

/// Expand a 4x4 base Gram (in state-id order a, b, c, d) to the photon list
/// of an event. Photons sharing an input mode carry the same state id, so
/// their mutual entries are exactly 1.
inline DistinguishabilityMatrix expand_gram(const Eigen::MatrixXcd& base,
                                            const std::vector<int>& state_ids) {
    const int n = static_cast<int>(state_ids.size());
    Eigen::MatrixXcd s(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            s(i, j) = (i == j || state_ids[i] == state_ids[j])
                          ? Complex(1, 0)
                          : base(state_ids[i], state_ids[j]);
    return DistinguishabilityMatrix(std::move(s));
}

/// Fourfold-coincidence breakdown of the two-source mixture at one (theta,
/// chi) point. Six-photon firings contribute to `total` only.
struct FourfoldBreakdown {
    double total = 0.0;    ///< all emission events
    double bg_aa = 0.0;    ///< in-situ AA double-emission contribution
    double bg_bb = 0.0;    ///< in-situ BB double-emission contribution
    double ab_only = 0.0;  ///< the desired single-pair-per-source signal
};

inline FourfoldBreakdown total_fourfold_probability(const SourceConfig& cfg,
                                                    const ExperimentStates& states,
                                                    double chi) {
    cfg.validate();
    const Eigen::MatrixXcd base = apply_spectral_factor(states.gram, cfg.spectral_factor,
                                                        cfg.spectral_cross_source_only);
    const Interferometer u = quitter(chi);
    const std::vector<int> all_outputs = {0, 1, 2, 3};
    FourfoldBreakdown out;
    for (const auto& ev : emission_mixture(cfg)) {
        std::vector<int> occ(4, 0);
        for (int p : ev.ports) ++occ[p];
        const double p =
            ev.weight * click_probability(u, occ, expand_gram(base, ev.states), all_outputs);
        out.total += p;
        if (ev.firing == "AA") out.bg_aa += p;
        else if (ev.firing == "BB") out.bg_bb += p;
        else if (ev.firing == "AB") out.ab_only += p;
    }
    return out;
}

}  // namespace qsim
