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
#include <set>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/states.hpp"

namespace qsim {

/// Least-squares fit of y = a + b cos(theta) with visibility (max - min)/max
/// of the fitted cosine and first-order error propagation from the fit
/// covariance. A noiseless (zero-residual) fit reports zero uncertainty.
struct VisibilityFit {
    double a = 0.0;
    double b = 0.0;
    double a_stderr = 0.0;
    double b_stderr = 0.0;
    double visibility = 0.0;
    double visibility_stderr = 0.0;
    int points = 0;
};

inline VisibilityFit fit_cosine(const std::vector<double>& theta, const std::vector<double>& y) {
    if (theta.size() != y.size()) throw DimensionError("fit inputs must have equal length");
    std::set<double> distinct(theta.begin(), theta.end());
    if (distinct.size() < 3)
        throw DegenerateFit("cosine fit needs at least 3 distinct theta values");
    const int n = static_cast<int>(theta.size());

    double sxx = 0.0, sx = 0.0, sxy = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = std::cos(theta[i]);
        sx += x;
        sxx += x * x;
        sxy += x * y[i];
        sy += y[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-14) throw DegenerateFit("cosine regressor is degenerate");

    VisibilityFit fit;
    fit.points = n;
    fit.a = (sxx * sy - sx * sxy) / det;
    fit.b = (n * sxy - sx * sy) / det;

    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - fit.a - fit.b * std::cos(theta[i]);
        ssr += r * r;
    }
    const double sigma2 = (n > 2) ? ssr / (n - 2) : 0.0;
    const double var_a = sigma2 * sxx / det;
    const double var_b = sigma2 * n / det;
    const double cov_ab = -sigma2 * sx / det;
    fit.a_stderr = std::sqrt(std::max(0.0, var_a));
    fit.b_stderr = std::sqrt(std::max(0.0, var_b));

    // visibility of a + b cos(theta): (max - min)/max = 2|b| / (a + |b|)
    const double babs = std::abs(fit.b);
    const double denom = fit.a + babs;
    if (denom > 0.0) {
        fit.visibility = 2.0 * babs / denom;
        const double dv_da = -2.0 * babs / (denom * denom);
        const double dv_db = (fit.b >= 0.0 ? 1.0 : -1.0) * 2.0 * fit.a / (denom * denom);
        const double var = dv_da * dv_da * var_a + dv_db * dv_db * var_b +
                           2.0 * dv_da * dv_db * cov_ab;
        fit.visibility_stderr = std::sqrt(std::max(0.0, var));
    }
    return fit;
}

}  // namespace qsim
