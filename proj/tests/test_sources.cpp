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

#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "qsim/fock.hpp"
#include "qsim/pipeline.hpp"
#include "qsim/sources.hpp"

using namespace qsim;
using Catch::Matchers::WithinAbs;

TEST_CASE("tmsv pair probabilities") {
    CHECK_THAT(tmsv_pair_probability(0.3, 0), WithinAbs(1.0 - 0.09, 1e-15));
    // six-photon emissions are lambda^2 of four-photon ones
    const double lambda = 0.16;
    CHECK_THAT(tmsv_pair_probability(lambda, 3) / tmsv_pair_probability(lambda, 2),
               WithinAbs(lambda * lambda, 1e-15));
    CHECK_THAT(lambda * lambda, WithinAbs(0.026, 5e-4));
    double total = 0.0;
    for (int n = 0; n < 2000; ++n) total += tmsv_pair_probability(0.7, n);
    CHECK_THAT(total, WithinAbs(1.0, 1e-12));
}

TEST_CASE("emission mixture: balanced weights for unit transmissions") {
    SourceConfig cfg;
    cfg.eta_in = {1, 1, 1, 1};
    cfg.max_total_photons = 4;
    const auto events = emission_mixture(cfg);
    REQUIRE(events.size() == 3);
    std::map<std::string, double> weight;
    for (const auto& ev : events) weight[ev.firing] = ev.weight;
    const double expected = std::pow(cfg.lambda, 4) * std::pow(1 - cfg.lambda * cfg.lambda, 2);
    CHECK_THAT(weight.at("AB"), WithinAbs(expected, 1e-15));
    CHECK_THAT(weight.at("AA"), WithinAbs(expected, 1e-15));
    CHECK_THAT(weight.at("BB"), WithinAbs(expected, 1e-15));
}

TEST_CASE("emission mixture: imbalanced transmissions give 1.11 : 1 : 1.24") {
    SourceConfig cfg;
    cfg.max_total_photons = 4;
    // eta1 eta4 / (eta2 eta3) = sqrt(1.24)
    cfg.eta_in = {1.0, 1.0 / std::pow(1.24, 0.25), 1.0 / std::pow(1.24, 0.25), 1.0};
    std::map<std::string, double> weight;
    for (const auto& ev : emission_mixture(cfg)) weight[ev.firing] = ev.weight;
    CHECK_THAT(weight.at("AB") / weight.at("AA"), WithinAbs(std::sqrt(1.24), 1e-12));
    CHECK_THAT(weight.at("BB") / weight.at("AA"), WithinAbs(1.24, 1e-12));
}

TEST_CASE("emission mixture: photon cap controls six-photon firings") {
    SourceConfig cfg;
    cfg.max_total_photons = 4;
    for (const auto& ev : emission_mixture(cfg)) CHECK(ev.ports.size() == 4);

    cfg.max_total_photons = 6;
    std::map<std::string, std::size_t> sizes;
    for (const auto& ev : emission_mixture(cfg)) sizes[ev.firing] = ev.ports.size();
    REQUIRE(sizes.size() == 7);
    CHECK(sizes.at("AAB") == 6);
    CHECK(sizes.at("ABB") == 6);
    CHECK(sizes.at("AAA") == 6);
    CHECK(sizes.at("BBB") == 6);
}

TEST_CASE("emission events carry port-determined states") {
    SourceConfig cfg;
    for (const auto& ev : emission_mixture(cfg)) {
        REQUIRE(ev.ports.size() == ev.states.size());
        for (std::size_t k = 0; k < ev.ports.size(); ++k)
            CHECK(ev.states[k] == kPortState[ev.ports[k]]);
        CHECK(std::is_sorted(ev.ports.begin(), ev.ports.end()));
        CHECK(ev.weight >= 0.0);
    }
}

TEST_CASE("double emission closed form") {
    CHECK_THAT(double_emission_p1111(0.0, 1.1), WithinAbs(3.0 / 32.0, 1e-15));
    CHECK_THAT(double_emission_p1111(1.0, kPi / 2), WithinAbs(0.0, 1e-15));

    SECTION("matches the engine for (0,2,2,0) -> (1,1,1,1)") {
        for (double r : {0.0, 0.3, 0.5, 0.9, 1.0}) {
            for (double chi : {0.0, 0.7, kPi / 2, 2.9}) {
                Eigen::MatrixXcd s(4, 4);
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j)
                        s(i, j) = (i / 2 == j / 2) ? 1.0 : r;  // photons (b, b, c, c)
                const double engine = transition_probability(
                    quitter(chi), OccupationPattern({0, 2, 2, 0}, {1, 1, 1, 1}),
                    DistinguishabilityMatrix(s));
                CHECK_THAT(engine, WithinAbs(double_emission_p1111(r, chi), 1e-12));
            }
        }
    }

    SECTION("matches the Fock oracle at full indistinguishability") {
        const GaussianWavepacket t(0.0, 1.0);
        const PhotonState b{PolarizationState::plus(), t, "b"};
        const PhotonState c{PolarizationState::plus(), t, "c"};  // r_bc = 1
        const double fock =
            oracle::fock_probability(quitter(kPi / 2), {1, 1, 2, 2}, {b, b, c, c}, {1, 1, 1, 1});
        CHECK_THAT(fock, WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("measured background scale") {
    CHECK_THAT(measured_background_scale(0.0), WithinAbs(1.0, 1e-15));
    CHECK_THAT(measured_background_scale(0.16), WithinAbs(1.0 / 0.9744, 1e-15));
    CHECK_THAT(measured_background_scale(0.16), WithinAbs(1.02627, 1e-5));
}

TEST_CASE("spectral factor degrades off-diagonal moduli") {
    const ExperimentStates st = prepare_ideal_states(0.4);
    const Eigen::MatrixXcd all = apply_spectral_factor(st.gram, 0.95, false);
    CHECK_THAT(std::abs(all(kStateA, kStateB)), WithinAbs(0.5 * std::sqrt(0.95), 1e-12));
    CHECK_THAT(std::abs(all(kStateB, kStateC)), WithinAbs(0.5 * std::sqrt(0.95), 1e-12));
    const Eigen::MatrixXcd cross = apply_spectral_factor(st.gram, 0.95, true);
    CHECK_THAT(std::abs(cross(kStateA, kStateB)), WithinAbs(0.5 * std::sqrt(0.95), 1e-12));
    // same-source pairs (b,c) and (a,d) stay untouched in cross-only mode
    CHECK_THAT(std::abs(cross(kStateB, kStateC)), WithinAbs(0.5, 1e-12));
    CHECK_THAT(std::abs(cross(kStateA, kStateD)), WithinAbs(0.5, 1e-12));
}

TEST_CASE("expand_gram pins same-state pairs to exactly 1") {
    const ExperimentStates st = prepare_ideal_states(0.9);
    const DistinguishabilityMatrix s = expand_gram(st.gram, {kStateB, kStateB, kStateC, kStateC});
    CHECK(s.entry(0, 1) == Complex(1, 0));
    CHECK(s.entry(2, 3) == Complex(1, 0));
    CHECK_THAT(std::abs(s.entry(0, 2) - st.gram(kStateB, kStateC)), WithinAbs(0.0, 1e-15));
}

TEST_CASE("total fourfold probability: backgrounds are flat in theta") {
    SourceConfig cfg;  // paper defaults, cap 6
    const StateModel states{};
    std::vector<double> aa, bb, ab;
    for (double theta : theta_grid(9)) {
        const auto breakdown = total_fourfold_probability(cfg, states.make(theta), kPi / 2);
        aa.push_back(breakdown.bg_aa);
        bb.push_back(breakdown.bg_bb);
        ab.push_back(breakdown.ab_only);
        CHECK(breakdown.total >=
              breakdown.bg_aa + breakdown.bg_bb + breakdown.ab_only - 1e-15);
    }
    for (double v : aa) CHECK_THAT(v, WithinAbs(aa.front(), 1e-12));
    for (double v : bb) CHECK_THAT(v, WithinAbs(bb.front(), 1e-12));
    // the AB part does vary (relative swing of a few percent)
    const double ab_max = *std::max_element(ab.begin(), ab.end());
    const double ab_min = *std::min_element(ab.begin(), ab.end());
    CHECK((ab_max - ab_min) / ab_max > 0.01);
}

TEST_CASE("total fourfold probability vanishes with dark sources") {
    SourceConfig cfg;
    cfg.lambda = 0.0;
    const auto breakdown = total_fourfold_probability(cfg, prepare_ideal_states(0.0), 1.0);
    CHECK_THAT(breakdown.total, WithinAbs(0.0, 1e-15));
}

TEST_CASE("AA and BB scattering probabilities coincide when r_bc = r_ad") {
    SourceConfig cfg;
    cfg.eta_in = {1, 1, 1, 1};  // remove weight asymmetry; states have r_bc = r_ad
    cfg.max_total_photons = 4;
    const auto breakdown = total_fourfold_probability(cfg, prepare_ideal_states(1.2), 0.8);
    CHECK_THAT(breakdown.bg_aa, WithinAbs(breakdown.bg_bb, 1e-13));
}

TEST_CASE("ideal-config AB visibility at chi = pi/2 is 27.2%") {
    // unit transmissions, no spectral degradation, four-photon cap
    SourceConfig cfg;
    cfg.eta_in = {1, 1, 1, 1};
    cfg.spectral_factor = 1.0;
    cfg.max_total_photons = 4;
    const StateModel states{};  // Gaussian defaults
    const auto lo = total_fourfold_probability(cfg, states.make(0.0), kPi / 2);
    const auto hi = total_fourfold_probability(cfg, states.make(kPi), kPi / 2);
    const double vis = (hi.ab_only - lo.ab_only) / hi.ab_only;
    CHECK_THAT(vis, WithinAbs(0.272, 3e-3));
}

TEST_CASE("blocked-source events marginalize the shuttered source exactly") {
    SourceConfig cfg;
    cfg.eta_in = {0.9, 0.8, 0.7, 0.6};
    // source A's pair configuration: B contributes no photons and no
    // vacuum-probability factor, so the double-emission weight is
    // fire(2) * eta2^2 * eta3^2 and relates to the in-situ weight by
    // exactly 1/(1 - lambda^2)
    double measured_aa = 0.0, in_situ_aa = 0.0;
    for (const auto& ev : emission_events_for_shutters(cfg, kSourceAMask))
        if (ev.firing == "AA") measured_aa = ev.weight;
    for (const auto& ev : emission_events_for_shutters(cfg, kAllOpenMask))
        if (ev.firing == "AA") in_situ_aa = ev.weight;
    const double expected =
        tmsv_pair_probability(cfg.lambda, 2) * cfg.eta_in[1] * cfg.eta_in[1] *
        cfg.eta_in[2] * cfg.eta_in[2];
    CHECK_THAT(measured_aa, WithinAbs(expected, 1e-18));
    CHECK_THAT(measured_aa / in_situ_aa,
               WithinAbs(measured_background_scale(cfg.lambda), 1e-12));
}

TEST_CASE("same-input photons must be indistinguishable") {
    // a Gram violating the same-mode block-of-ones structure is rejected
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Identity(2, 2);
    s(0, 1) = s(1, 0) = 0.5;
    CHECK_THROWS_AS(transition_probability(quitter(0.3),
                                           OccupationPattern({0, 2, 0, 0}, {1, 1, 0, 0}),
                                           DistinguishabilityMatrix(s)),
                    InvalidGram);
}

TEST_CASE("source config validation") {
    SourceConfig cfg;
    cfg.lambda = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidState);
    cfg = SourceConfig{};
    cfg.eta_in[2] = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidState);
    cfg = SourceConfig{};
    cfg.max_total_photons = 5;
    CHECK_THROWS_AS(cfg.validate(), InvalidState);
}
