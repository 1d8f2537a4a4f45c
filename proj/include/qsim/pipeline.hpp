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

// End-to-end experiment model: chi sampling, synthetic count generation for
// the full shutter-blocking protocol, the normalization ladder, background
// subtraction, chi postselection, cosine fits and visibility predictions.

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qsim/errors.hpp"
#include "qsim/fitting.hpp"
#include "qsim/parallel.hpp"
#include "qsim/rng.hpp"
#include "qsim/scattering.hpp"
#include "qsim/sources.hpp"
#include "qsim/states.hpp"

namespace qsim {

// ---------------------------------------------------------------------------
// chi sampling and averaging
// ---------------------------------------------------------------------------

/// Lower edge of the locking window, arccos(1/3) = 1.23096.
inline double locked_window_lo() { return std::acos(1.0 / 3.0); }
inline double locked_window_hi() { return kPi - std::acos(1.0 / 3.0); }

enum class ChiPolicyKind { Uniform, Locked, Fixed, Window };

/// How the quitter phase is distributed across records.
///  - uniform: chi ~ U[0, pi]
///  - locked: half the samples uniform in [arccos(1/3), pi - arccos(1/3)],
///            half uniform in the complement of [0, pi]
///  - fixed(x): always x
///  - window(lo, hi): chi ~ U[lo, hi]
struct ChiPolicy {
    ChiPolicyKind kind = ChiPolicyKind::Locked;
    double value = kPi / 2;  // Fixed
    double lo = 0.0;         // Window
    double hi = kPi;

    static ChiPolicy uniform() { return {ChiPolicyKind::Uniform}; }
    static ChiPolicy locked() { return {ChiPolicyKind::Locked}; }
    static ChiPolicy fixed(double x) { return {ChiPolicyKind::Fixed, x}; }
    static ChiPolicy window(double lo, double hi) {
        return {ChiPolicyKind::Window, 0.0, lo, hi};
    }
};

inline double sample_chi(const ChiPolicy& policy, Rng& rng) {
    switch (policy.kind) {
        case ChiPolicyKind::Uniform:
            return rng.uniform(0.0, kPi);
        case ChiPolicyKind::Fixed: {
            double r = std::fmod(policy.value, 2.0 * kPi);
            if (r < 0.0) r += 2.0 * kPi;
            return r;
        }
        case ChiPolicyKind::Window:
            return rng.uniform(policy.lo, policy.hi);
        case ChiPolicyKind::Locked: {
            const double c = locked_window_lo();
            if (rng.next_double() < 0.5) return rng.uniform(c, kPi - c);
            const double u = rng.uniform(0.0, 2.0 * c);
            return u < c ? u : (kPi - c) + (u - c);
        }
    }
    throw Error("unknown chi policy");
}

/// chi postselection window; `complement` selects everything outside [lo, hi].
struct ChiWindow {
    double lo = 0.0;
    double hi = kPi;
    bool complement = false;

    bool contains(double chi) const {
        const bool inside = chi >= lo && chi <= hi;
        return complement ? !inside : inside;
    }
};

/// Moments E[cos k chi], E[sin k chi] of a chi distribution, used to average
/// probability signals over a sampling policy analytically.
class ChiMoments {
  public:
    static ChiMoments from_policy(const ChiPolicy& policy, int max_order,
                                  const std::optional<ChiWindow>& window = std::nullopt) {
        ChiMoments m;
        m.cos_.assign(max_order + 1, 0.0);
        m.sin_.assign(max_order + 1, 0.0);
        m.cos_[0] = 1.0;
        if (policy.kind == ChiPolicyKind::Fixed) {
            if (window && !window->contains(policy.value))
                throw MissingData("fixed chi lies outside the postselection window");
            for (int k = 1; k <= max_order; ++k) {
                m.cos_[k] = std::cos(k * policy.value);
                m.sin_[k] = std::sin(k * policy.value);
            }
            return m;
        }
        std::vector<std::array<double, 3>> pieces;  // lo, hi, mass
        const double c = locked_window_lo();
        switch (policy.kind) {
            case ChiPolicyKind::Uniform:
                pieces = {{0.0, kPi, 1.0}};
                break;
            case ChiPolicyKind::Window:
                pieces = {{policy.lo, policy.hi, 1.0}};
                break;
            case ChiPolicyKind::Locked:
                pieces = {{c, kPi - c, 0.5}, {0.0, c, 0.25}, {kPi - c, kPi, 0.25}};
                break;
            default:
                throw Error("unknown chi policy");
        }
        if (window) {
            std::vector<std::array<double, 3>> cut;
            for (const auto& p : pieces) {
                const double len = p[1] - p[0];
                auto push = [&](double lo, double hi) {
                    if (hi > lo) cut.push_back({lo, hi, p[2] * (hi - lo) / len});
                };
                if (!window->complement) {
                    push(std::max(p[0], window->lo), std::min(p[1], window->hi));
                } else {
                    push(p[0], std::min(p[1], window->lo));
                    push(std::max(p[0], window->hi), p[1]);
                }
            }
            pieces = std::move(cut);
        }
        double mass = 0.0;
        for (const auto& p : pieces) mass += p[2];
        if (mass <= 0.0) throw MissingData("postselection window has no probability mass");
        for (int k = 1; k <= max_order; ++k) {
            double ck = 0.0, sk = 0.0;
            for (const auto& p : pieces) {
                const double density = p[2] / (p[1] - p[0]);
                ck += density * (std::sin(k * p[1]) - std::sin(k * p[0])) / k;
                sk += density * (std::cos(k * p[0]) - std::cos(k * p[1])) / k;
            }
            m.cos_[k] = ck / mass;
            m.sin_[k] = sk / mass;
        }
        return m;
    }

    int max_order() const { return static_cast<int>(cos_.size()) - 1; }
    double cos_moment(int k) const { return cos_[k]; }
    double sin_moment(int k) const { return sin_[k]; }

  private:
    std::vector<double> cos_, sin_;
};

/// Real trigonometric polynomial in chi of bounded order. Click probabilities
/// through the quitter are exactly of this form (order <= photon count), so a
/// DFT over 2*order + 1 nodes recovers them exactly.
struct TrigPoly {
    double a0 = 0.0;
    std::vector<double> ac, as;  // cos(k chi), sin(k chi) coefficients, k = 1..order

    int order() const { return static_cast<int>(ac.size()); }

    void reset(int order) {
        ac.assign(order, 0.0);
        as.assign(order, 0.0);
    }

    double eval(double chi) const {
        double v = a0;
        for (int k = 1; k <= order(); ++k) {
            v += ac[k - 1] * std::cos(k * chi) + as[k - 1] * std::sin(k * chi);
        }
        return v;
    }

    double average(const ChiMoments& m) const {
        double v = a0;
        for (int k = 1; k <= order(); ++k) {
            v += ac[k - 1] * m.cos_moment(k) + as[k - 1] * m.sin_moment(k);
        }
        return v;
    }

    void add_scaled(const TrigPoly& other, double scale) {
        if (other.order() > order()) {
            ac.resize(other.order(), 0.0);
            as.resize(other.order(), 0.0);
        }
        a0 += scale * other.a0;
        for (int k = 0; k < other.order(); ++k) {
            ac[k] += scale * other.ac[k];
            as[k] += scale * other.as[k];
        }
    }

    static TrigPoly fit(int order, const std::function<double(double)>& f) {
        const int nodes = 2 * order + 1;
        std::vector<double> values(nodes);
        for (int m = 0; m < nodes; ++m) values[m] = f(2.0 * kPi * m / nodes);
        return from_nodes(order, values);
    }

    static TrigPoly from_nodes(int order, const std::vector<double>& values) {
        const int nodes = 2 * order + 1;
        TrigPoly p;
        p.reset(order);
        for (int m = 0; m < nodes; ++m) p.a0 += values[m];
        p.a0 /= nodes;
        for (int k = 1; k <= order; ++k) {
            double ck = 0.0, sk = 0.0;
            for (int m = 0; m < nodes; ++m) {
                const double x = 2.0 * kPi * k * m / nodes;
                ck += values[m] * std::cos(x);
                sk += values[m] * std::sin(x);
            }
            p.ac[k - 1] = 2.0 * ck / nodes;
            p.as[k - 1] = 2.0 * sk / nodes;
        }
        return p;
    }
};

// ---------------------------------------------------------------------------
// experiment configuration
// ---------------------------------------------------------------------------

/// Internal-state preparation: Gaussian wavepackets (default) or the top-hat
/// idealization with directly pinned overlap moduli.
struct StateModel {
    bool ideal = false;
    WalkoffConfig walkoff;
    double ideal_temporal_overlap = 1.0 / std::sqrt(2.0);
    double ideal_t23 = 0.0;

    ExperimentStates make(double theta) const {
        return ideal ? prepare_ideal_states(theta, ideal_temporal_overlap, ideal_t23)
                     : prepare_experiment_states(theta, walkoff);
    }
};

/// Optional imperfection knobs.
struct Perturbations {
    /// Relative modulation of the single-photon scattering probability from
    /// input 1 to each output: P -> P (1 + epsilon_j/2 cos theta).
    std::array<double, 4> epsilon = {0.0, 0.0, 0.0, 0.0};
    /// Relative drift of r_ad^2 with theta: r_ad^2 -> r_ad^2 (1 + drift cos theta).
    double r_ad_drift = 0.0;

    bool any() const {
        return r_ad_drift != 0.0 ||
               epsilon != std::array<double, 4>{0.0, 0.0, 0.0, 0.0};
    }
};

struct ExperimentConfig {
    SourceConfig source;
    StateModel states;
    ChiPolicy chi_policy = ChiPolicy::locked();
    long long shots_per_point = 1'000'000;
    std::uint64_t seed = 1;
    int sweeps = 3;
    int theta_points = 9;
    bool noiseless = false;
    Perturbations perturbations;
    std::vector<double> sweep_scales;  // optional per-sweep coupling factors

    double sweep_scale(int sweep) const {
        if (sweep_scales.empty()) return 1.0;
        if (sweep < 0 || sweep >= static_cast<int>(sweep_scales.size()))
            throw DimensionError("sweep_scales does not cover all sweeps");
        return sweep_scales[sweep];
    }
};

/// Nine equally spaced theta values from -pi/3 to 7 pi/3 (inclusive).
inline std::vector<double> theta_grid(int points = 9) {
    if (points < 2) throw InvalidState("theta grid needs at least two points");
    std::vector<double> grid(points);
    const double lo = -kPi / 3.0, hi = 7.0 * kPi / 3.0;
    for (int k = 0; k < points; ++k) grid[k] = lo + (hi - lo) * k / (points - 1);
    return grid;
}

/// The shutter-blocking protocol: every single input, every pair, every
/// triple, then all four inputs open. Masks over input modes 0..3.
inline const std::vector<unsigned>& shutter_protocol() {
    static const std::vector<unsigned> configs = [] {
        std::vector<unsigned> out;
        for (int size = 1; size <= 4; ++size)
            for (unsigned mask = 1; mask < 16; ++mask)
                if (std::popcount(mask) == size) out.push_back(mask);
        return out;
    }();
    return configs;
}

inline constexpr unsigned kAllOpenMask = 0xF;
inline constexpr unsigned kSourceAMask = 0b0110;  // inputs 2, 3 (modes 1, 2)
inline constexpr unsigned kSourceBMask = 0b1001;  // inputs 1, 4 (modes 0, 3)

/// Counts recorded at one (sweep, theta, shutter configuration) cell.
/// counts[mask] is the number of trials whose click set was exactly the
/// outputs in `mask` (bit j = output mode j, i.e. detector 5 + j).
struct CountRecord {
    int sweep = 0;
    int theta_index = 0;
    double theta = 0.0;
    double chi = 0.0;
    unsigned open_inputs = 0;
    std::array<double, 16> counts{};
};

// ---------------------------------------------------------------------------
// the two-source click model
// ---------------------------------------------------------------------------

/// Exact click-set statistics of the two-source experiment, represented per
/// (shutter configuration, theta) as trigonometric polynomials in chi.
class TwoSourceModel {
  public:
    TwoSourceModel(SourceConfig source, StateModel states, Perturbations perturbations = {})
        : source_(std::move(source)), states_(std::move(states)),
          perturbations_(perturbations) {
        source_.validate();
    }

    const SourceConfig& source() const { return source_; }
    const StateModel& states() const { return states_; }

    /// P(click set exactly `subset_mask`) at the given phase.
    double probability(unsigned open_mask, double theta, double chi,
                       unsigned subset_mask) const {
        return profile(open_mask, theta).by_subset[subset_mask].eval(chi);
    }

    /// The same probability averaged over a chi distribution.
    double averaged_probability(unsigned open_mask, double theta, const ChiMoments& moments,
                                unsigned subset_mask) const {
        return profile(open_mask, theta).by_subset[subset_mask].average(moments);
    }

    /// Base 4x4 Gram in (a, b, c, d) order with spectral degradation and the
    /// r_ad drift perturbation applied.
    Eigen::MatrixXcd base_gram(double theta) const {
        Eigen::MatrixXcd g = apply_spectral_factor(states_.make(theta).gram,
                                                   source_.spectral_factor,
                                                   source_.spectral_cross_source_only);
        if (perturbations_.r_ad_drift != 0.0) {
            const double factor = 1.0 + perturbations_.r_ad_drift * std::cos(theta);
            if (factor < 0.0) throw InvalidState("r_ad drift drives r_ad^2 negative");
            g(kStateA, kStateD) *= std::sqrt(factor);
            g(kStateD, kStateA) = std::conj(g(kStateA, kStateD));
        }
        return g;
    }

    struct ClickProfile {
        std::array<TrigPoly, 16> by_subset;
    };

    const ClickProfile& profile(unsigned open_mask, double theta) const {
        const Key key{open_mask, canonical(theta)};
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = profiles_.find(key);
            if (it != profiles_.end()) return it->second;
        }
        ClickProfile built = build_profile(open_mask, theta);
        std::lock_guard<std::mutex> lock(mutex_);
        return profiles_.emplace(key, std::move(built)).first->second;
    }

    /// Precompute profiles for a set of (open_mask, theta) cells in parallel.
    void prebuild(const std::vector<unsigned>& masks, const std::vector<double>& thetas) const {
        std::vector<std::pair<unsigned, double>> cells;
        for (unsigned m : masks)
            for (double t : thetas) cells.emplace_back(m, t);
        parallel_for(cells.size(), [&](std::size_t i) {
            profile(cells[i].first, cells[i].second);
        });
    }

  private:
    using Key = std::pair<unsigned, std::uint64_t>;

    static std::uint64_t canonical(double theta) {
        std::uint64_t bits;
        std::memcpy(&bits, &theta, sizeof(bits));
        return bits;
    }

    struct Group {
        std::vector<int> occupation;  // photons per input mode
        std::vector<int> state_ids;
        double weight = 0.0;
    };

    ClickProfile build_profile(unsigned open_mask, double theta) const {
        const Eigen::MatrixXcd base = base_gram(theta);

        // merge emission events with identical arriving occupations
        std::map<std::vector<int>, Group> groups;
        for (const auto& ev : emission_events_for_shutters(source_, open_mask)) {
            std::vector<int> occ(4, 0);
            for (int p : ev.ports) ++occ[p];
            auto& g = groups[occ];
            if (g.weight == 0.0) {
                g.occupation = occ;
                g.state_ids = ev.states;
            }
            g.weight += ev.weight;
        }

        ClickProfile out;
        for (auto& poly : out.by_subset) poly.reset(source_.max_total_photons);
        for (const auto& [occ, group] : groups) {
            const int n = static_cast<int>(group.state_ids.size());
            if (n == 0) continue;
            const auto polys = group_profile(group, base, theta);
            for (unsigned mask = 1; mask < 16; ++mask)
                out.by_subset[mask].add_scaled(polys[mask], group.weight);
        }
        return out;
    }

    /// Click-set trig polynomials for one arriving photon multiset, cached by
    /// the multiset and the Gram entries it sees (theta enters only there).
    std::array<TrigPoly, 16> group_profile(const Group& group, const Eigen::MatrixXcd& base,
                                           double theta) const {
        const int n = static_cast<int>(group.state_ids.size());
        std::string key(reinterpret_cast<const char*>(group.occupation.data()),
                        group.occupation.size() * sizeof(int));
        const DistinguishabilityMatrix gram = expand_gram(base, group.state_ids);
        key.append(reinterpret_cast<const char*>(gram.matrix().data()),
                   static_cast<std::size_t>(gram.matrix().size()) * sizeof(Complex));
        const bool perturb_singles =
            n == 1 && group.occupation[0] == 1 && perturbations_.any();
        if (perturb_singles)
            key.append(reinterpret_cast<const char*>(&theta), sizeof(theta));

        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = group_cache_.find(key);
            if (it != group_cache_.end()) return it->second;
        }

        std::array<TrigPoly, 16> polys;
        const int order = n;
        const int nodes = 2 * order + 1;
        std::array<std::vector<double>, 16> node_values;
        for (auto& v : node_values) v.assign(nodes, 0.0);

        for (int m = 0; m < nodes; ++m) {
            const double chi = 2.0 * kPi * m / nodes;
            const Interferometer u = quitter(chi);
            for (const auto& s_vec : all_output_patterns(n)) {
                unsigned mask = 0;
                for (int j = 0; j < 4; ++j)
                    if (s_vec[j] > 0) mask |= 1u << j;
                node_values[mask][m] +=
                    transition_probability(u, OccupationPattern(group.occupation, s_vec), gram);
            }
        }
        for (unsigned mask = 1; mask < 16; ++mask) {
            polys[mask] = TrigPoly::from_nodes(order, node_values[mask]);
            if (perturb_singles) {
                const int j = std::countr_zero(mask);
                const double factor =
                    1.0 + 0.5 * perturbations_.epsilon[j] * std::cos(theta);
                polys[mask].a0 *= factor;
                for (auto& c : polys[mask].ac) c *= factor;
                for (auto& c : polys[mask].as) c *= factor;
            }
        }

        std::lock_guard<std::mutex> lock(mutex_);
        return group_cache_.emplace(std::move(key), polys).first->second;
    }

    static const std::vector<std::vector<int>>& all_output_patterns(int n) {
        static std::map<int, std::vector<std::vector<int>>> cache;
        static std::mutex m;
        std::lock_guard<std::mutex> lock(m);
        auto it = cache.find(n);
        if (it == cache.end()) {
            std::vector<std::vector<int>> patterns;
            for (int s0 = 0; s0 <= n; ++s0)
                for (int s1 = 0; s0 + s1 <= n; ++s1)
                    for (int s2 = 0; s0 + s1 + s2 <= n; ++s2)
                        patterns.push_back({s0, s1, s2, n - s0 - s1 - s2});
            it = cache.emplace(n, std::move(patterns)).first;
        }
        return it->second;
    }

    SourceConfig source_;
    StateModel states_;
    Perturbations perturbations_;
    mutable std::mutex mutex_;
    mutable std::map<Key, ClickProfile> profiles_;
    mutable std::map<std::string, std::array<TrigPoly, 16>> group_cache_;
};

// ---------------------------------------------------------------------------
// synthetic sweeps
// ---------------------------------------------------------------------------

/// Simulate the full blocking protocol: for every sweep a chi value is
/// sampled once (ambient drift of the quitter phase is slow compared to one
/// sweep, so all theta steps and shutter configurations of a sweep share it),
/// then Poisson counts are drawn per click subset with mean
///   shots * sweep_scale * prod_{j in subset} eta_out_j * P(subset).
/// In noiseless mode the expected values are recorded instead.
inline std::vector<CountRecord> simulate_sweep(const ExperimentConfig& cfg,
                                               const TwoSourceModel& model) {
    const auto grid = theta_grid(cfg.theta_points);
    const auto& protocol = shutter_protocol();
    model.prebuild(protocol, grid);

    std::vector<CountRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.sweeps) * grid.size() * protocol.size());
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        const double scale = cfg.sweep_scale(sweep);
        Rng chi_rng = Rng::stream(cfg.seed, {0xC41ULL, (std::uint64_t)sweep});
        const double chi = sample_chi(cfg.chi_policy, chi_rng);
        for (int k = 0; k < static_cast<int>(grid.size()); ++k) {
            for (int c = 0; c < static_cast<int>(protocol.size()); ++c) {
                const unsigned mask = protocol[c];
                CountRecord rec;
                rec.sweep = sweep;
                rec.theta_index = k;
                rec.theta = grid[k];
                rec.chi = chi;
                rec.open_inputs = mask;
                Rng count_rng = Rng::stream(
                    cfg.seed, {0xC0137ULL, (std::uint64_t)sweep, (std::uint64_t)k, (std::uint64_t)c});
                for (unsigned subset = 1; subset < 16; ++subset) {
                    double eta = 1.0;
                    for (int j = 0; j < 4; ++j)
                        if (subset & (1u << j)) eta *= cfg.source.eta_out[j];
                    const double mean = cfg.shots_per_point * scale * eta *
                                        std::max(0.0, model.probability(mask, grid[k], chi, subset));
                    rec.counts[subset] =
                        cfg.noiseless ? mean : static_cast<double>(count_rng.poisson(mean));
                }
                records.push_back(rec);
            }
        }
    }
    return records;
}

inline std::vector<CountRecord> simulate_sweep(const ExperimentConfig& cfg) {
    TwoSourceModel model(cfg.source, cfg.states, cfg.perturbations);
    return simulate_sweep(cfg, model);
}

// ---------------------------------------------------------------------------
// count analysis: the normalization ladder
// ---------------------------------------------------------------------------

/// Coincidence count for a detector set: the number of trials in which at
/// least the detectors in `need_mask` fired (a fourfold also registers in
/// every twofold channel, as with a real time tagger).
inline double coincidence_count(const CountRecord& rec, unsigned need_mask) {
    double total = 0.0;
    for (unsigned subset = 1; subset < 16; ++subset)
        if ((subset & need_mask) == need_mask) total += rec.counts[subset];
    return total;
}

/// A theta series of per-point means with standard errors.
struct ChannelSeries {
    std::vector<double> theta;
    std::vector<double> mean;
    std::vector<double> stderr_;
};

namespace detail {

/// records indexed as [sweep][theta_index][open_mask]
class RecordIndex {
  public:
    explicit RecordIndex(const std::vector<CountRecord>& records) {
        for (const auto& rec : records) {
            auto key = std::make_tuple(rec.sweep, rec.theta_index, rec.open_inputs);
            index_[key] = &rec;
            sweeps_.insert(rec.sweep);
            theta_index_.insert(rec.theta_index);
            thetas_[rec.theta_index] = rec.theta;
        }
    }

    const CountRecord& at(int sweep, int theta_index, unsigned mask) const {
        auto it = index_.find(std::make_tuple(sweep, theta_index, mask));
        if (it == index_.end())
            throw MissingData("missing shutter configuration " + std::to_string(mask) +
                              " for sweep " + std::to_string(sweep) + ", theta index " +
                              std::to_string(theta_index));
        return *it->second;
    }

    const std::set<int>& sweeps() const { return sweeps_; }
    const std::set<int>& theta_indices() const { return theta_index_; }
    double theta(int theta_index) const { return thetas_.at(theta_index); }

  private:
    std::map<std::tuple<int, int, unsigned>, const CountRecord*> index_;
    std::set<int> sweeps_;
    std::set<int> theta_index_;
    std::map<int, double> thetas_;
};

/// Per-sweep mean normalization followed by the cross-sweep average and
/// standard error. `values[sweep][theta_index]` may contain NaN holes (e.g.
/// postselected-out cells); sweeps with no finite cells are dropped.
inline ChannelSeries normalize_and_average(const RecordIndex& idx,
                                           const std::map<int, std::map<int, double>>& values) {
    std::map<int, std::vector<double>> by_theta;
    for (const auto& [sweep, series] : values) {
        double sum = 0.0;
        int count = 0;
        for (const auto& [k, v] : series) {
            if (std::isfinite(v)) {
                sum += v;
                ++count;
            }
        }
        if (count == 0 || sum == 0.0) continue;
        const double mean = sum / count;
        for (const auto& [k, v] : series)
            if (std::isfinite(v)) by_theta[k].push_back(v / mean);
    }
    if (by_theta.empty()) throw MissingData("no usable sweeps in channel");
    ChannelSeries out;
    for (const auto& [k, vals] : by_theta) {
        double m = 0.0;
        for (double v : vals) m += v;
        m /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - m) * (v - m);
        const double sem =
            vals.size() > 1 ? std::sqrt(var / (vals.size() - 1) / vals.size()) : 0.0;
        out.theta.push_back(idx.theta(k));
        out.mean.push_back(m);
        out.stderr_.push_back(sem);
    }
    return out;
}

/// Cross-sweep average without per-sweep normalization (raw counts).
inline ChannelSeries average_raw(const RecordIndex& idx,
                                 const std::map<int, std::map<int, double>>& values) {
    std::map<int, std::vector<double>> by_theta;
    for (const auto& [sweep, series] : values)
        for (const auto& [k, v] : series)
            if (std::isfinite(v)) by_theta[k].push_back(v);
    if (by_theta.empty()) throw MissingData("no usable cells in channel");
    ChannelSeries out;
    for (const auto& [k, vals] : by_theta) {
        double m = 0.0;
        for (double v : vals) m += v;
        m /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - m) * (v - m);
        const double sem =
            vals.size() > 1 ? std::sqrt(var / (vals.size() - 1) / vals.size()) : 0.0;
        out.theta.push_back(idx.theta(k));
        out.mean.push_back(m);
        out.stderr_.push_back(sem);
    }
    return out;
}

}  // namespace detail

/// Normalized singles: each sweep's channel C^i_j(theta) divided by its
/// theta-average, then averaged across sweeps. Keys are (input mode, output
/// mode), both 0-based.
inline std::map<std::pair<int, int>, ChannelSeries> normalize_singles(
    const std::vector<CountRecord>& records) {
    detail::RecordIndex idx(records);
    std::map<std::pair<int, int>, ChannelSeries> out;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            std::map<int, std::map<int, double>> values;
            for (int sweep : idx.sweeps())
                for (int k : idx.theta_indices())
                    values[sweep][k] = coincidence_count(idx.at(sweep, k, 1u << i), 1u << j);
            out[{i, j}] = detail::normalize_and_average(idx, values);
        }
    }
    return out;
}

/// Normalized two-photon signals. For cross-source input pairs the
/// single-source double-emission twofolds (measured with one arm open) are
/// subtracted, scaled by (1 - lambda^2); then the channel is divided by the
/// product of separately measured singles, mean-normalized per sweep and
/// averaged. Keys are ((input i, input j), (output k, output l)).
inline std::map<std::pair<std::pair<int, int>, std::pair<int, int>>, ChannelSeries>
normalize_twofolds(const std::vector<CountRecord>& records, double lambda) {
    detail::RecordIndex idx(records);
    const double in_situ = 1.0 / measured_background_scale(lambda);
    std::map<std::pair<std::pair<int, int>, std::pair<int, int>>, ChannelSeries> out;
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            const unsigned pair_mask = (1u << i) | (1u << j);
            const bool same_source = pair_mask == kSourceAMask || pair_mask == kSourceBMask;
            for (int k = 0; k < 4; ++k) {
                for (int l = k + 1; l < 4; ++l) {
                    const unsigned out_mask = (1u << k) | (1u << l);
                    std::map<int, std::map<int, double>> values;
                    for (int sweep : idx.sweeps()) {
                        for (int t : idx.theta_indices()) {
                            double v = coincidence_count(idx.at(sweep, t, pair_mask), out_mask);
                            if (!same_source) {
                                v -= in_situ *
                                     (coincidence_count(idx.at(sweep, t, 1u << i), out_mask) +
                                      coincidence_count(idx.at(sweep, t, 1u << j), out_mask));
                            }
                            const double s1 =
                                coincidence_count(idx.at(sweep, t, 1u << i), 1u << k);
                            const double s2 =
                                coincidence_count(idx.at(sweep, t, 1u << j), 1u << l);
                            values[sweep][t] =
                                (s1 > 0.0 && s2 > 0.0)
                                    ? v / (s1 * s2)
                                    : std::numeric_limits<double>::quiet_NaN();
                        }
                    }
                    out[{{i, j}, {k, l}}] = detail::normalize_and_average(idx, values);
                }
            }
        }
    }
    return out;
}

/// Normalized three-photon signals; analogous to the twofolds, with the
/// single-source double-emission threefolds (measured from that source's own
/// pair configuration) subtracted. Keys are ((i, j, k), (l, m, n)).
inline std::map<std::pair<std::array<int, 3>, std::array<int, 3>>, ChannelSeries>
normalize_threefolds(const std::vector<CountRecord>& records, double lambda) {
    detail::RecordIndex idx(records);
    const double in_situ = 1.0 / measured_background_scale(lambda);
    std::map<std::pair<std::array<int, 3>, std::array<int, 3>>, ChannelSeries> out;
    std::vector<std::array<int, 3>> triples;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            for (int c = b + 1; c < 4; ++c) triples.push_back({a, b, c});
    for (const auto& in : triples) {
        const unsigned in_mask = (1u << in[0]) | (1u << in[1]) | (1u << in[2]);
        // every input triple contains exactly one same-source pair
        const unsigned bg_mask =
            (in_mask & kSourceAMask) == kSourceAMask ? kSourceAMask : kSourceBMask;
        for (const auto& outp : triples) {
            const unsigned out_mask = (1u << outp[0]) | (1u << outp[1]) | (1u << outp[2]);
            std::map<int, std::map<int, double>> values;
            for (int sweep : idx.sweeps()) {
                for (int t : idx.theta_indices()) {
                    double v = coincidence_count(idx.at(sweep, t, in_mask), out_mask) -
                               in_situ * coincidence_count(idx.at(sweep, t, bg_mask), out_mask);
                    double denom = 1.0;
                    for (int q = 0; q < 3; ++q)
                        denom *= coincidence_count(idx.at(sweep, t, 1u << in[q]), 1u << outp[q]);
                    values[sweep][t] = denom > 0.0
                                           ? v / denom
                                           : std::numeric_limits<double>::quiet_NaN();
                }
            }
            out[{in, outp}] = detail::normalize_and_average(idx, values);
        }
    }
    return out;
}

/// Fourfold analysis: background subtraction, singles-ladder normalization,
/// optional chi postselection, and cosine fits for the total and
/// background-subtracted signals.
struct FourfoldReport {
    VisibilityFit total_fit;
    VisibilityFit bgsub_fit;
    ChannelSeries total;
    ChannelSeries bgsub;
    ChannelSeries bg_aa;
    ChannelSeries bg_bb;
    int cells_used = 0;
    std::optional<ChiWindow> window;
};

inline FourfoldReport analyze_fourfolds(const std::vector<CountRecord>& records, double lambda,
                                        const std::optional<ChiWindow>& postselect = std::nullopt) {
    detail::RecordIndex idx(records);
    const double in_situ = 1.0 / measured_background_scale(lambda);
    const unsigned full = 0xF;

    std::map<int, std::map<int, double>> total_vals, bgsub_vals, aa_vals, bb_vals;
    int used = 0;
    for (int sweep : idx.sweeps()) {
        for (int t : idx.theta_indices()) {
            const CountRecord& all_open = idx.at(sweep, t, kAllOpenMask);
            if (postselect && !postselect->contains(all_open.chi)) continue;
            ++used;
            const double total = coincidence_count(all_open, full);
            const double aa = coincidence_count(idx.at(sweep, t, kSourceAMask), full);
            const double bb = coincidence_count(idx.at(sweep, t, kSourceBMask), full);
            const double bgsub = total - in_situ * (aa + bb);
            double denom = 1.0;
            for (int q = 0; q < 4; ++q)
                denom *= coincidence_count(idx.at(sweep, t, 1u << q), 1u << q);
            total_vals[sweep][t] = total;
            aa_vals[sweep][t] = aa;
            bb_vals[sweep][t] = bb;
            bgsub_vals[sweep][t] =
                denom > 0.0 ? bgsub / denom : std::numeric_limits<double>::quiet_NaN();
        }
    }
    if (used == 0) throw MissingData("chi postselection removed every record");

    FourfoldReport report;
    report.window = postselect;
    report.cells_used = used;
    report.total = detail::average_raw(idx, total_vals);
    report.bg_aa = detail::average_raw(idx, aa_vals);
    report.bg_bb = detail::average_raw(idx, bb_vals);
    report.bgsub = detail::normalize_and_average(idx, bgsub_vals);
    report.total_fit = fit_cosine(report.total.theta, report.total.mean);
    report.bgsub_fit = fit_cosine(report.bgsub.theta, report.bgsub.mean);
    return report;
}

// ---------------------------------------------------------------------------
// predictions
// ---------------------------------------------------------------------------

/// Signals the noiseless pipeline converges to, computed from the model's
/// trig-polynomial profiles and the analytic moments of the chi policy.
struct PredictedSignals {
    std::vector<double> theta;
    std::vector<double> total;
    std::vector<double> bgsub;
    VisibilityFit total_fit;
    VisibilityFit bgsub_fit;
};

inline PredictedSignals predict_signals(const TwoSourceModel& model, const ChiPolicy& policy,
                                        int theta_points = 9,
                                        const std::optional<ChiWindow>& window = std::nullopt) {
    const ChiMoments moments =
        ChiMoments::from_policy(policy, model.source().max_total_photons, window);
    const double in_situ = 1.0 / measured_background_scale(model.source().lambda);
    PredictedSignals sig;
    sig.theta = theta_grid(theta_points);
    for (double theta : sig.theta) {
        const double total = model.averaged_probability(kAllOpenMask, theta, moments, 0xF);
        const double aa = model.averaged_probability(kSourceAMask, theta, moments, 0xF);
        const double bb = model.averaged_probability(kSourceBMask, theta, moments, 0xF);
        sig.total.push_back(total);
        sig.bgsub.push_back(total - in_situ * (aa + bb));
    }
    sig.total_fit = fit_cosine(sig.theta, sig.total);
    sig.bgsub_fit = fit_cosine(sig.theta, sig.bgsub);
    return sig;
}

/// The pure four-photon signal P_1111(theta; chi) for the prepared states
/// (one photon per input, no source mixture), and its visibility in theta.
inline double ab_only_probability(const ExperimentStates& states, double theta_unused,
                                  double chi) {
    (void)theta_unused;
    const OccupationPattern occ({1, 1, 1, 1}, {1, 1, 1, 1});
    // photon order by input mode: d, b, c, a
    const std::vector<int> ids = {kStateD, kStateB, kStateC, kStateA};
    return transition_probability(quitter(chi), occ, expand_gram(states.gram, ids));
}

/// Visibility over theta of the pure four-photon signal at fixed chi
/// (maximum at theta = pi, minimum at theta = 0).
inline double ab_only_visibility(const StateModel& states, double chi) {
    const double pmax = ab_only_probability(states.make(kPi), kPi, chi);
    const double pmin = ab_only_probability(states.make(0.0), 0.0, chi);
    return (pmax - pmin) / pmax;
}

/// Same visibility with chi averaged over a policy (exact trig-poly average).
inline double ab_only_visibility_averaged(const StateModel& states, const ChiPolicy& policy,
                                          const std::optional<ChiWindow>& window = std::nullopt) {
    const ChiMoments moments = ChiMoments::from_policy(policy, 4, window);
    auto averaged = [&](double theta) {
        TrigPoly p = TrigPoly::fit(4, [&](double chi) {
            return ab_only_probability(states.make(theta), theta, chi);
        });
        return p.average(moments);
    };
    const double pmax = averaged(kPi);
    const double pmin = averaged(0.0);
    return (pmax - pmin) / pmax;
}

/// Full prediction report: ideal and prepared-state visibilities, the
/// experimental predictions for the configured policy with and without chi
/// postselection, and the visibility-vs-chi curve.
struct PredictionReport {
    double ideal_vis_chi_half_pi = 0.0;
    double ideal_vis_chi_zero = 0.0;
    double ideal_vis_uniform = 0.0;
    double gaussian_vis_chi_half_pi = 0.0;
    double gaussian_vis_chi_zero = 0.0;
    double gaussian_vis_uniform = 0.0;
    double gaussian_vis_policy = 0.0;  ///< AB-only, no sources/losses, policy-averaged
    double total_vis = 0.0;
    double bgsub_vis = 0.0;
    double window_total_vis = 0.0;
    double window_bgsub_vis = 0.0;
    double complement_total_vis = 0.0;
    double complement_bgsub_vis = 0.0;
    double sixphoton_correction_pp = 0.0;  ///< bg-subtracted visibility drop, percentage points
    std::vector<std::pair<double, double>> visibility_curve;  ///< (chi, AB-only visibility)
};

inline PredictionReport predict_visibilities(const ExperimentConfig& cfg) {
    PredictionReport rep;
    rep.ideal_vis_chi_half_pi = closed_form_visibility(0.5, kPi / 2);
    rep.ideal_vis_chi_zero = closed_form_visibility(0.5, 0.0);
    rep.ideal_vis_uniform = closed_form_visibility_uniform_chi(0.5);

    rep.gaussian_vis_chi_half_pi = ab_only_visibility(cfg.states, kPi / 2);
    rep.gaussian_vis_chi_zero = ab_only_visibility(cfg.states, 0.0);
    rep.gaussian_vis_uniform =
        ab_only_visibility_averaged(cfg.states, ChiPolicy::uniform());
    rep.gaussian_vis_policy = ab_only_visibility_averaged(cfg.states, cfg.chi_policy);

    TwoSourceModel model(cfg.source, cfg.states, cfg.perturbations);
    const ChiWindow locked_window{locked_window_lo(), locked_window_hi(), false};
    const ChiWindow complement{locked_window_lo(), locked_window_hi(), true};
    const auto all = predict_signals(model, cfg.chi_policy, cfg.theta_points);
    const auto win = predict_signals(model, cfg.chi_policy, cfg.theta_points, locked_window);
    const auto comp = predict_signals(model, cfg.chi_policy, cfg.theta_points, complement);
    rep.total_vis = all.total_fit.visibility;
    rep.bgsub_vis = all.bgsub_fit.visibility;
    rep.window_total_vis = win.total_fit.visibility;
    rep.window_bgsub_vis = win.bgsub_fit.visibility;
    rep.complement_total_vis = comp.total_fit.visibility;
    rep.complement_bgsub_vis = comp.bgsub_fit.visibility;

    if (cfg.source.max_total_photons > 4) {
        SourceConfig four_only = cfg.source;
        four_only.max_total_photons = 4;
        TwoSourceModel reduced(four_only, cfg.states, cfg.perturbations);
        const auto base = predict_signals(reduced, cfg.chi_policy, cfg.theta_points);
        rep.sixphoton_correction_pp =
            (base.bgsub_fit.visibility - rep.bgsub_vis) * 100.0;
    }

    for (int i = 0; i <= 180; ++i) {
        const double chi = kPi * i / 180.0;
        rep.visibility_curve.emplace_back(chi, ab_only_visibility(cfg.states, chi));
    }
    return rep;
}

}  // namespace qsim
