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

#include <stdexcept>
#include <string>

namespace qsim {

/// Base class for all domain errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mismatched or non-square matrix/vector dimensions.
struct DimensionError : Error {
    using Error::Error;
};

/// A matrix that must be Hermitian (or have unit diagonal) is not.
struct NonHermitianInput : Error {
    using Error::Error;
};

/// A putative Gram matrix fails positive semidefiniteness.
struct InvalidGram : Error {
    using Error::Error;
};

/// A state violates its normalization invariant.
struct InvalidState : Error {
    using Error::Error;
};

/// A collective phase is requested on a cycle with a vanishing edge.
struct UndefinedPhase : Error {
    using Error::Error;
};

/// The requested wavepacket overlap target cannot be met.
struct InfeasibleTiming : Error {
    using Error::Error;
};

/// A required shutter configuration or channel is absent from a count log.
struct MissingData : Error {
    using Error::Error;
};

/// Too few distinct sample points for a fit.
struct DegenerateFit : Error {
    using Error::Error;
};

/// Problem size exceeds the supported desk-scale caps.
struct CapacityError : Error {
    using Error::Error;
};

/// Malformed input file or serialized structure.
struct FormatError : Error {
    using Error::Error;
};

}  // namespace qsim
