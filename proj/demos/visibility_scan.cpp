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

// Library walkthrough: prepare the four pairwise distinguishable states,
// inspect their collective phases, decompose the fourfold coincidence
// probability into exchange cycles, and scan its visibility against the
// interferometer phase chi.

#include <cstdio>

#include "qsim/pipeline.hpp"
#include "qsim/scattering.hpp"
#include "qsim/sources.hpp"
#include "qsim/states.hpp"

int main() {
    using namespace qsim;

    // Gaussian wavepackets with a 2.1:1 duration ratio, t2 and t3 walked off
    // to |<t2|t3>| = 0.1, polarization angle theta on state d.
    const double theta = kPi / 2;
    const ExperimentStates states = prepare_experiment_states(theta);
    const DistinguishabilityMatrix gram = states.gram_matrix();

    std::printf("pairwise moduli: r_ab=%.3f r_bc=%.3f r_cd=%.3f r_da=%.3f "
                "r_ac=%.3f r_bd=%.3f\n",
                gram.modulus(0, 1), gram.modulus(1, 2), gram.modulus(2, 3),
                gram.modulus(3, 0), gram.modulus(0, 2), gram.modulus(1, 3));

    // every triad phase is undefined, yet the four-particle phase equals theta
    try {
        triad_phase(gram, 0, 1, 2);
    } catch (const UndefinedPhase&) {
        std::printf("triad phase (a,b,c): undefined (vanishing a-c edge)\n");
    }
    std::printf("four-particle phase:  %.6f (theta = %.6f)\n",
                four_particle_phase(gram, 0, 1, 2, 3), theta);

    // exchange-cycle decomposition of P_1111 at chi = pi/2 and theta = 0
    // (where the fourfold exchange is extremal); photons enter in the order
    // d, b, c, a on inputs 1-4
    const DistinguishabilityMatrix photon_gram =
        expand_gram(prepare_experiment_states(0.0).gram,
                    {kStateD, kStateB, kStateC, kStateA});
    const OccupationPattern coincidence({1, 1, 1, 1}, {1, 1, 1, 1});
    double by_cycle_length[5] = {};
    for (const auto& term :
         exchange_decomposition(quitter(kPi / 2), coincidence, photon_gram)) {
        by_cycle_length[term.cycle_type.front()] += term.value.real();
    }
    std::printf("exchange contributions at chi = pi/2, theta = 0:\n");
    std::printf("  identity          %+.6f\n", by_cycle_length[1]);
    std::printf("  pair exchanges    %+.6f\n", by_cycle_length[2]);
    std::printf("  triple exchanges  %+.6f\n", by_cycle_length[3]);
    std::printf("  fourfold exchange %+.6f\n", by_cycle_length[4]);

    // visibility of the coincidence signal in theta, as a function of chi
    const StateModel model{};
    std::printf("chi scan of the fourfold visibility:\n");
    for (int i = 0; i <= 8; ++i) {
        const double chi = kPi * i / 8;
        std::printf("  chi = %5.3f  visibility = %5.2f%%\n", chi,
                    100.0 * ab_only_visibility(model, chi));
    }
    return 0;
}
