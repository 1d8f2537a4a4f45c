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

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <numeric>

#include "qsim/io.hpp"
#include "qsim/pipeline.hpp"

using namespace qsim;
using Catch::Matchers::WithinAbs;

namespace {

/// Small, fast config: ideal states, four-photon cap, fixed chi.
ExperimentConfig fast_config() {
    ExperimentConfig cfg;
    cfg.states.ideal = true;
    cfg.source.max_total_photons = 4;
    cfg.source.spectral_factor = 1.0;
    cfg.chi_policy = ChiPolicy::fixed(kPi / 2);
    cfg.noiseless = true;
    cfg.sweeps = 2;
    cfg.shots_per_point = 1'000'000;
    return cfg;
}

}  // namespace

TEST_CASE("theta grid spans -pi/3 to 7pi/3") {
    const auto grid = theta_grid(9);
    REQUIRE(grid.size() == 9);
    CHECK_THAT(grid.front(), WithinAbs(-kPi / 3, 1e-14));
    CHECK_THAT(grid.back(), WithinAbs(7 * kPi / 3, 1e-14));
    for (int k = 1; k < 9; ++k) CHECK_THAT(grid[k] - grid[k - 1], WithinAbs(kPi / 3, 1e-13));
}

TEST_CASE("sample_chi: fixed policy is constant") {
    Rng rng(1);
    for (int i = 0; i < 10; ++i)
        CHECK_THAT(sample_chi(ChiPolicy::fixed(kPi / 2), rng), WithinAbs(kPi / 2, 1e-15));
}

TEST_CASE("sample_chi: locked policy puts half the samples in the window") {
    Rng rng(12345);
    const double lo = locked_window_lo(), hi = locked_window_hi();
    int inside = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const double chi = sample_chi(ChiPolicy::locked(), rng);
        CHECK(chi >= 0.0);
        CHECK(chi <= kPi);
        if (chi >= lo && chi <= hi) ++inside;
    }
    CHECK_THAT(static_cast<double>(inside) / draws, WithinAbs(0.5, 0.01));
    CHECK_THAT(lo, WithinAbs(1.23, 0.005));
    CHECK_THAT(hi, WithinAbs(1.91, 0.005));
}

TEST_CASE("sample_chi: uniform policy has vanishing mean cos 2chi") {
    Rng rng(777);
    double mean = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) mean += std::cos(2.0 * sample_chi(ChiPolicy::uniform(), rng));
    CHECK_THAT(mean / draws, WithinAbs(0.0, 0.01));
}

TEST_CASE("chi moments match Monte Carlo estimates") {
    for (const ChiPolicy& policy : {ChiPolicy::locked(), ChiPolicy::uniform()}) {
        const ChiMoments m = ChiMoments::from_policy(policy, 4);
        Rng rng(31);
        double c2 = 0.0, s1 = 0.0;
        const int draws = 400000;
        for (int i = 0; i < draws; ++i) {
            const double chi = sample_chi(policy, rng);
            c2 += std::cos(2 * chi);
            s1 += std::sin(chi);
        }
        CHECK_THAT(m.cos_moment(2), WithinAbs(c2 / draws, 0.01));
        CHECK_THAT(m.sin_moment(1), WithinAbs(s1 / draws, 0.01));
    }
    // conditional moments: locked policy restricted to its own window
    const ChiWindow window{locked_window_lo(), locked_window_hi(), false};
    const ChiMoments inside =
        ChiMoments::from_policy(ChiPolicy::locked(), 2, window);
    const double c = locked_window_lo();
    const double expected = -std::sin(2 * c) / (kPi - 2 * c);
    CHECK_THAT(inside.cos_moment(2), WithinAbs(expected, 1e-12));
}

TEST_CASE("trig polynomial fit is exact for bounded-order signals") {
    auto f = [](double chi) {
        return 0.3 + 0.2 * std::cos(chi) - 0.05 * std::cos(2 * chi) + 0.01 * std::sin(3 * chi);
    };
    const TrigPoly p = TrigPoly::fit(4, f);
    for (double chi : {0.0, 0.3, 1.1, 2.9, 4.4, 6.0})
        CHECK_THAT(p.eval(chi), WithinAbs(f(chi), 1e-12));
}

TEST_CASE("poisson sampler has the right first two moments") {
    Rng rng(99);
    for (double mean : {0.5, 3.0, 40.0, 5000.0}) {
        const int draws = 40000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double v = static_cast<double>(rng.poisson(mean));
            sum += v;
            sum2 += v * v;
        }
        const double m = sum / draws;
        const double var = sum2 / draws - m * m;
        CHECK_THAT(m, WithinAbs(mean, 5.0 * std::sqrt(mean / draws) + 1e-9));
        CHECK_THAT(var / mean, WithinAbs(1.0, 0.1));
    }
}

TEST_CASE("simulate_sweep: zero shots give all-zero counts") {
    ExperimentConfig cfg = fast_config();
    cfg.shots_per_point = 0;
    cfg.noiseless = false;
    for (const auto& rec : simulate_sweep(cfg))
        for (double c : rec.counts) CHECK(c == 0.0);
}

TEST_CASE("simulate_sweep covers the full blocking protocol") {
    ExperimentConfig cfg = fast_config();
    cfg.sweeps = 1;
    const auto records = simulate_sweep(cfg);
    CHECK(records.size() == 15 * 9);
    std::set<unsigned> masks;
    for (const auto& rec : records) {
        masks.insert(rec.open_inputs);
        CHECK(rec.chi >= 0.0);
        CHECK(rec.chi < 2 * kPi);
    }
    CHECK(masks.size() == 15);
}

TEST_CASE("simulate_sweep is deterministic and seed-sensitive") {
    ExperimentConfig cfg = fast_config();
    cfg.noiseless = false;
    cfg.shots_per_point = 200000;
    cfg.chi_policy = ChiPolicy::locked();
    const std::string log1 = io::records_to_jsonl(simulate_sweep(cfg));
    const std::string log2 = io::records_to_jsonl(simulate_sweep(cfg));
    CHECK(log1 == log2);
    cfg.seed = 2;
    CHECK(io::records_to_jsonl(simulate_sweep(cfg)) != log1);
}

TEST_CASE("normalize_singles: flat channels normalize to 1") {
    const auto records = simulate_sweep(fast_config());
    const auto channels = normalize_singles(records);
    // inputs 2, 3, 4 are never varied; their normalized singles are exactly 1
    for (int i = 1; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            const auto& series = channels.at({i, j});
            for (std::size_t k = 0; k < series.mean.size(); ++k) {
                CHECK_THAT(series.mean[k], WithinAbs(1.0, 1e-12));
                CHECK_THAT(series.stderr_[k], WithinAbs(0.0, 1e-12));
            }
        }
    }
}

TEST_CASE("normalize_singles recovers an injected epsilon modulation") {
    ExperimentConfig cfg = fast_config();
    // a faint source keeps the unmodulated double-emission singles from
    // diluting the recovered amplitude by more than a part in 10^3
    cfg.source.lambda = 0.04;
    cfg.perturbations.epsilon = {-0.0135, -0.01, 0.0, 0.007};
    const auto channels = normalize_singles(simulate_sweep(cfg));
    for (int j = 0; j < 4; ++j) {
        const auto& series = channels.at({0, j});
        const VisibilityFit fit = fit_cosine(series.theta, series.mean);
        const double recovered = 2.0 * fit.b / fit.a;
        CHECK_THAT(recovered, WithinAbs(cfg.perturbations.epsilon[j], 2e-4));
    }
}

TEST_CASE("normalization is invariant under per-sweep coupling scales") {
    ExperimentConfig scaled = fast_config();
    scaled.sweep_scales = {1.0, 2.3};
    const auto records = simulate_sweep(scaled);
    const auto channels = normalize_singles(records);
    for (const auto& [key, series] : channels)
        for (double sem : series.stderr_) CHECK_THAT(sem, WithinAbs(0.0, 1e-12));

    ExperimentConfig flat = fast_config();
    const auto base = analyze_fourfolds(simulate_sweep(flat), flat.source.lambda);
    const auto scaled_report = analyze_fourfolds(records, scaled.source.lambda);
    CHECK_THAT(scaled_report.bgsub_fit.visibility,
               WithinAbs(base.bgsub_fit.visibility, 1e-12));
    CHECK_THAT(scaled_report.total_fit.visibility,
               WithinAbs(base.total_fit.visibility, 1e-12));
}

TEST_CASE("normalize_twofolds: cross-source b-d channels show the (1 - r_bd^2) dip") {
    ExperimentConfig cfg = fast_config();
    cfg.states.ideal = false;
    cfg.states.walkoff.t23_target = 0.15;
    cfg.sweeps = 1;
    const auto channels = normalize_twofolds(simulate_sweep(cfg), cfg.source.lambda);
    // inputs (1, 2) = (d, b); outputs (5,7), (5,8), (6,7), (6,8)
    const std::vector<std::pair<int, int>> cross_outputs = {{0, 2}, {0, 3}, {1, 2}, {1, 3}};
    for (const auto& outputs : cross_outputs) {
        const auto& series = channels.at({{0, 1}, outputs});
        const double max = *std::max_element(series.mean.begin(), series.mean.end());
        const double min = *std::min_element(series.mean.begin(), series.mean.end());
        const double vis = (max - min) / max;
        INFO("outputs " << outputs.first << "," << outputs.second);
        CHECK_THAT(vis, WithinAbs(0.15 * 0.15, 0.004));
        // shape follows 1 - t23^2 cos^2(theta/2) up to normalization
        std::vector<double> expected;
        for (double theta : series.theta) {
            const double r2 = 0.15 * 0.15 * std::pow(std::cos(theta / 2), 2);
            expected.push_back(1.0 - r2);
        }
        const double emean =
            std::accumulate(expected.begin(), expected.end(), 0.0) / expected.size();
        for (std::size_t k = 0; k < expected.size(); ++k)
            CHECK_THAT(series.mean[k], WithinAbs(expected[k] / emean, 2e-3));
    }
}

TEST_CASE("normalize_twofolds: constant overlaps give flat channels") {
    const auto channels = normalize_twofolds(simulate_sweep(fast_config()), 0.16);
    // same-source pair (1,4) = (d, a): r_ad is theta-independent
    const auto& series = channels.at({{0, 3}, {0, 1}});
    for (double v : series.mean) CHECK_THAT(v, WithinAbs(1.0, 1e-12));
}

TEST_CASE("normalize_threefolds: ideal states are flat; missing data throws") {
    const auto records = simulate_sweep(fast_config());
    const auto channels = normalize_threefolds(records, 0.16);
    for (const auto& [key, series] : channels)
        for (double v : series.mean) CHECK_THAT(v, WithinAbs(1.0, 1e-9));

    // drop one shutter configuration entirely
    std::vector<CountRecord> partial;
    for (const auto& rec : records)
        if (rec.open_inputs != kSourceAMask) partial.push_back(rec);
    CHECK_THROWS_AS(normalize_threefolds(partial, 0.16), MissingData);
    CHECK_THROWS_AS(analyze_fourfolds(partial, 0.16), MissingData);
}

TEST_CASE("threefold modulation stays below ~2.5% with a finite t2-t3 overlap") {
    ExperimentConfig cfg = fast_config();
    cfg.states.ideal = false;
    cfg.states.walkoff.t23_target = 0.15;
    cfg.sweeps = 1;
    const auto channels = normalize_threefolds(simulate_sweep(cfg), cfg.source.lambda);
    for (const auto& [key, series] : channels) {
        const double max = *std::max_element(series.mean.begin(), series.mean.end());
        const double min = *std::min_element(series.mean.begin(), series.mean.end());
        CHECK((max - min) / max <= 0.03);
    }
}

TEST_CASE("background subtraction identity is exact at the four-photon cap") {
    ExperimentConfig cfg = fast_config();  // cap 4, noiseless, fixed chi
    cfg.sweeps = 1;
    const auto records = simulate_sweep(cfg);
    {
        // reconstruct the AB-only expectation per theta directly from the model
        TwoSourceModel model(cfg.source, cfg.states, cfg.perturbations);
        detail::RecordIndex idx(records);
        const double in_situ = 1.0 / measured_background_scale(cfg.source.lambda);
        for (int t : idx.theta_indices()) {
            const auto& all_open = idx.at(0, t, kAllOpenMask);
            const double bgsub =
                coincidence_count(all_open, 0xF) -
                in_situ * (coincidence_count(idx.at(0, t, kSourceAMask), 0xF) +
                           coincidence_count(idx.at(0, t, kSourceBMask), 0xF));
            // AB-only expectation: weight * P_1111
            double expected = 0.0;
            const Eigen::MatrixXcd base = model.base_gram(all_open.theta);
            for (const auto& ev : emission_mixture(cfg.source)) {
                if (ev.firing != "AB") continue;
                expected = ev.weight * cfg.shots_per_point *
                           transition_probability(quitter(all_open.chi),
                                                  OccupationPattern({1, 1, 1, 1}, {1, 1, 1, 1}),
                                                  expand_gram(base, ev.states));
            }
            CHECK_THAT(bgsub, WithinAbs(expected, 1e-12 * cfg.shots_per_point));
        }
    }
}

TEST_CASE("fourfold fits: negative cosine amplitude, flat backgrounds") {
    ExperimentConfig cfg = fast_config();
    const auto report = analyze_fourfolds(simulate_sweep(cfg), cfg.source.lambda);
    CHECK(report.bgsub_fit.b < 0.0);
    CHECK(report.total_fit.b < 0.0);
    for (std::size_t k = 0; k < report.bg_aa.mean.size(); ++k) {
        CHECK_THAT(report.bg_aa.mean[k], WithinAbs(report.bg_aa.mean.front(), 1e-9));
        CHECK_THAT(report.bg_bb.mean[k], WithinAbs(report.bg_bb.mean.front(), 1e-9));
    }
    // noiseless visibility at fixed chi = pi/2 with ideal states: exactly 30%
    CHECK_THAT(report.bgsub_fit.visibility, WithinAbs(0.30, 1e-9));
    CHECK_THAT(report.bgsub_fit.visibility_stderr, WithinAbs(0.0, 1e-9));
}

TEST_CASE("a growing t2-t3 overlap pushes the fitted amplitude toward +cos theta") {
    auto fitted_b = [](double t23) {
        ExperimentConfig cfg = fast_config();
        cfg.states.ideal_t23 = t23;
        cfg.sweeps = 1;
        const auto report = analyze_fourfolds(simulate_sweep(cfg), cfg.source.lambda);
        return report.bgsub_fit.b;
    };
    const double b_small = fitted_b(0.05);
    const double b_large = fitted_b(0.35);
    CHECK(b_small < 0.0);
    CHECK(b_large > b_small);
}

TEST_CASE("chi postselection: window ordering and degenerate cases") {
    ExperimentConfig cfg = fast_config();
    cfg.chi_policy = ChiPolicy::locked();
    cfg.sweeps = 12;
    const auto records = simulate_sweep(cfg);
    const ChiWindow window{locked_window_lo(), locked_window_hi(), false};
    const ChiWindow complement{locked_window_lo(), locked_window_hi(), true};
    const auto all = analyze_fourfolds(records, cfg.source.lambda);
    const auto inside = analyze_fourfolds(records, cfg.source.lambda, window);
    const auto outside = analyze_fourfolds(records, cfg.source.lambda, complement);
    CHECK(inside.cells_used + outside.cells_used == all.cells_used);
    CHECK(inside.bgsub_fit.visibility > all.bgsub_fit.visibility);
    CHECK(all.bgsub_fit.visibility > outside.bgsub_fit.visibility);

    const ChiWindow empty{5.0, 6.0, false};
    CHECK_THROWS_AS(analyze_fourfolds(records, cfg.source.lambda, empty), MissingData);
}

TEST_CASE("fit requires at least three distinct theta values") {
    ExperimentConfig cfg = fast_config();
    cfg.theta_points = 2;
    cfg.sweeps = 1;
    CHECK_THROWS_AS(analyze_fourfolds(simulate_sweep(cfg), cfg.source.lambda), DegenerateFit);
}

TEST_CASE("noisy fourfold totals stay within Poisson tolerance of their means") {
    ExperimentConfig cfg;  // paper parameters, six-photon cap
    cfg.shots_per_point = 1'000'000;
    cfg.sweeps = 1;
    cfg.seed = 31337;
    TwoSourceModel model(cfg.source, cfg.states, cfg.perturbations);
    const auto records = simulate_sweep(cfg, model);
    int checked = 0;
    for (const auto& rec : records) {
        if (rec.open_inputs != kAllOpenMask) continue;
        const double mean = cfg.shots_per_point *
                            model.probability(kAllOpenMask, rec.theta, rec.chi, 0xF);
        const double sigma = std::sqrt(std::max(mean, 1.0));
        INFO("theta index " << rec.theta_index << ": count " << rec.counts[0xF] << ", mean "
                            << mean);
        CHECK(std::abs(rec.counts[0xF] - mean) <= 3.0 * sigma);
        ++checked;
    }
    CHECK(checked == cfg.theta_points);
}

TEST_CASE("noisy pipeline reproduces the noiseless visibility within errors") {
    ExperimentConfig cfg = fast_config();
    cfg.chi_policy = ChiPolicy::fixed(kPi / 2);
    cfg.noiseless = false;
    cfg.shots_per_point = 50'000'000;
    cfg.sweeps = 3;
    const auto report = analyze_fourfolds(simulate_sweep(cfg), cfg.source.lambda);
    CHECK(report.bgsub_fit.visibility_stderr > 0.0);
    CHECK_THAT(report.bgsub_fit.visibility,
               WithinAbs(0.30, std::max(0.03, 4.0 * report.bgsub_fit.visibility_stderr)));
}
