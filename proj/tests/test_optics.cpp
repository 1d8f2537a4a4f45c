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
#include <random>

#include "qsim/optics.hpp"
#include "qsim/scattering.hpp"

using namespace qsim;
using Catch::Matchers::WithinAbs;

TEST_CASE("quitter at chi = 0 is the real +-1/2 matrix") {
    const Interferometer u = quitter(0.0);
    const double expected[4][4] = {{1, 1, 1, 1}, {1, 1, -1, -1}, {1, -1, 1, -1}, {1, -1, -1, 1}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK_THAT(u.entry(i, j).real(), WithinAbs(0.5 * expected[i][j], 1e-15));
            CHECK_THAT(u.entry(i, j).imag(), WithinAbs(0.0, 1e-15));
        }
}

TEST_CASE("quitter at chi = pi/2 puts +i/2 on the phase diagonal") {
    const Interferometer u = quitter(kPi / 2);
    CHECK_THAT(std::abs(u.entry(2, 2) - Complex(0, 0.5)), WithinAbs(0.0, 1e-15));
    CHECK_THAT(std::abs(u.entry(3, 3) - Complex(0, 0.5)), WithinAbs(0.0, 1e-15));
    CHECK_THAT(std::abs(u.entry(2, 3) + Complex(0, 0.5)), WithinAbs(0.0, 1e-15));
}

TEST_CASE("quitter is unitary and balanced for random chi") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> chi(0.0, 2 * kPi);
    for (int trial = 0; trial < 100; ++trial) {
        const Interferometer u = quitter(chi(rng));
        const Eigen::MatrixXcd gap =
            u.matrix().adjoint() * u.matrix() - Eigen::MatrixXcd::Identity(4, 4);
        CHECK(gap.cwiseAbs().maxCoeff() < 1e-10);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK_THAT(std::abs(u.entry(i, j)), WithinAbs(0.5, 1e-15));
    }
}

TEST_CASE("chi_from_paths") {
    CHECK_THAT(chi_from_paths({1.0, 1.5, 2.5, 3.0, 0.8}), WithinAbs(0.0, 1e-12));
    // mismatch of lambda0/4 gives pi/2
    CHECK_THAT(chi_from_paths({1.2, 1.0, 1.0, 1.0, 0.8}), WithinAbs(kPi / 2, 1e-12));
    // a full wavelength reduces to zero (distance measured on the circle)
    const double wrapped = chi_from_paths({1.8, 1.0, 1.0, 1.0, 0.8});
    CHECK_THAT(std::min(wrapped, 2 * kPi - wrapped), WithinAbs(0.0, 1e-9));
    CHECK(chi_from_paths({0.0, 3.7, 0.0, 0.0, 1.0}) >= 0.0);
    CHECK(chi_from_paths({0.0, 3.7, 0.0, 0.0, 1.0}) < 2 * kPi);
}

TEST_CASE("hom closed form endpoints") {
    CHECK_THAT(hom_probability(1.0, 0.0), WithinAbs(0.0, 1e-15));
    CHECK_THAT(hom_probability(0.0, 1.234), WithinAbs(0.125, 1e-15));
    CHECK_THAT(hom_probability(0.9, kPi), WithinAbs(0.2375, 1e-15));
}

TEST_CASE("hom closed form equals the scattering engine") {
    // inputs (2,3), outputs (5,7) of the quitter, arbitrary overlap modulus
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> r2dist(0.0, 1.0), chidist(0.0, 2 * kPi);
    for (int trial = 0; trial < 100; ++trial) {
        const double r2 = r2dist(rng), chi = chidist(rng);
        Eigen::MatrixXcd s = Eigen::MatrixXcd::Identity(2, 2);
        s(0, 1) = s(1, 0) = std::sqrt(r2);
        const double engine = transition_probability(
            quitter(chi), OccupationPattern({0, 1, 1, 0}, {1, 0, 1, 0}),
            DistinguishabilityMatrix(s));
        CHECK_THAT(engine, WithinAbs(hom_probability(r2, chi), 1e-12));
    }
}

TEST_CASE("beam splitter bounds and balanced HOM suppression") {
    CHECK_THROWS_AS(beam_splitter(-0.1), InvalidState);
    CHECK_THROWS_AS(beam_splitter(1.1), InvalidState);
    const double p = transition_probability(beam_splitter(0.5),
                                            OccupationPattern({1, 1}, {1, 1}),
                                            DistinguishabilityMatrix::all_ones(2));
    CHECK_THAT(p, WithinAbs(0.0, 1e-12));
}

TEST_CASE("non-unitary matrices are rejected") {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(3, 3);
    m(0, 0) = Complex(1.1, 0.0);
    CHECK_THROWS_AS(Interferometer(std::move(m)), InvalidState);
}
