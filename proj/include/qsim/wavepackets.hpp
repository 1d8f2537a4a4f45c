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

#include <cmath>
#include <complex>

#include "qsim/errors.hpp"

namespace qsim {

/// Normalized transform-limited Gaussian temporal wavepacket
///   psi(tau) = (pi sigma^2)^{-1/4} exp(-(center - tau)^2 / (2 sigma^2)
///                                      + i carrier (center - tau)).
struct GaussianWavepacket {
    double center = 0.0;   ///< arrival time of the wavepacket centre (arb. units)
    double sigma = 1.0;    ///< temporal width, > 0
    double carrier = 0.0;  ///< carrier angular frequency

    GaussianWavepacket() = default;
    GaussianWavepacket(double center_, double sigma_, double carrier_ = 0.0)
        : center(center_), sigma(sigma_), carrier(carrier_) {
        if (!(sigma > 0.0)) throw InvalidState("wavepacket sigma must be > 0");
    }
};

/// Overlap <p|q> of two normalized Gaussian wavepackets, in closed form.
///
/// Writing a = 1/(2 sigma_p^2), b = 1/(2 sigma_q^2), delta = carrier_p - carrier_q:
///   <p|q> = sqrt(2 sigma_p sigma_q / (sigma_p^2 + sigma_q^2))
///           * exp(-(center_p - center_q)^2 / (2 (sigma_p^2 + sigma_q^2)))
///           * exp(-delta^2 / (4 (a + b)))
///           * exp(i [carrier_q center_q - carrier_p center_p + delta mu]),
/// with mu = (a center_p + b center_q)/(a + b). For equal carriers the phase
/// reduces to carrier*(center_q - center_p), so products of overlaps around a
/// closed cycle are real.
inline std::complex<double> gaussian_overlap(const GaussianWavepacket& p,
                                             const GaussianWavepacket& q) {
    const double s2 = p.sigma * p.sigma + q.sigma * q.sigma;
    const double dt = p.center - q.center;
    const double modulus =
        std::sqrt(2.0 * p.sigma * q.sigma / s2) * std::exp(-dt * dt / (2.0 * s2));

    const double a = 1.0 / (2.0 * p.sigma * p.sigma);
    const double b = 1.0 / (2.0 * q.sigma * q.sigma);
    const double delta = p.carrier - q.carrier;
    const double mu = (a * p.center + b * q.center) / (a + b);
    const double chirp_damp = std::exp(-delta * delta / (4.0 * (a + b)));
    const double phase = q.carrier * q.center - p.carrier * p.center + delta * mu;

    return modulus * chirp_damp * std::polar(1.0, phase);
}

}  // namespace qsim
