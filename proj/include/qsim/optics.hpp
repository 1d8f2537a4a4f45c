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
#include <cmath>
#include <complex>

#include "qsim/errors.hpp"
#include "qsim/states.hpp"

namespace qsim {

/// m x m complex unitary transfer matrix. Convention throughout: rows are
/// input modes, columns are output modes (for the quitter, inputs 1-4 and
/// outputs 5-8).
class Interferometer {
  public:
    explicit Interferometer(Eigen::MatrixXcd u) : u_(std::move(u)) {
        if (u_.rows() != u_.cols() || u_.rows() < 1)
            throw DimensionError("interferometer matrix must be square");
        const Eigen::MatrixXcd gap =
            u_.adjoint() * u_ - Eigen::MatrixXcd::Identity(u_.rows(), u_.cols());
        if (gap.cwiseAbs().maxCoeff() > 1e-10)
            throw InvalidState("interferometer matrix is not unitary");
    }

    int modes() const { return static_cast<int>(u_.rows()); }
    const Eigen::MatrixXcd& matrix() const { return u_; }
    Complex entry(int input, int output) const { return u_(input, output); }

  private:
    Eigen::MatrixXcd u_;
};

/// The fully connected balanced four-mode splitter with free internal phase
/// chi. Every entry has modulus 1/2; unitary for every chi.
inline Interferometer quitter(double chi) {
    const Complex e = std::polar(1.0, chi);
    Eigen::MatrixXcd u(4, 4);
    u << 1, 1, 1, 1,
         1, 1, -1, -1,
         1, -1, e, -e,
         1, -1, -e, e;
    return Interferometer(0.5 * u);
}

/// Real two-port beam splitter with the given transmissivity; plumbing for
/// two-mode dip oracle tests.
inline Interferometer beam_splitter(double transmissivity) {
    if (transmissivity < 0.0 || transmissivity > 1.0)
        throw InvalidState("transmissivity must lie in [0, 1]");
    const double t = std::sqrt(transmissivity);
    const double r = std::sqrt(1.0 - transmissivity);
    Eigen::MatrixXcd u(2, 2);
    u << t, r,
         r, -t;
    return Interferometer(std::move(u));
}

/// Internal path lengths of the folded quitter and the central wavelength.
struct PathLengths {
    double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0;
    double lambda0 = 1.0;
};

/// chi = (2 pi / lambda0) ((L1 + L4) - (L2 + L3)), reduced to [0, 2 pi).
inline double chi_from_paths(const PathLengths& p) {
    if (!(p.lambda0 > 0.0)) throw InvalidState("lambda0 must be > 0");
    const double chi = 2.0 * kPi / p.lambda0 * ((p.l1 + p.l4) - (p.l2 + p.l3));
    double r = std::fmod(chi, 2.0 * kPi);
    if (r < 0.0) r += 2.0 * kPi;
    return r;
}

/// Phase-dependent two-photon coincidence probability for inputs (2,3) and
/// outputs (5,7) of the quitter: (1 - r^2 cos chi)/8.
inline double hom_probability(double r_squared, double chi) {
    if (r_squared < 0.0 || r_squared > 1.0)
        throw InvalidState("r_squared must lie in [0, 1]");
    return (1.0 - r_squared * std::cos(chi)) / 8.0;
}

}  // namespace qsim
