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

// File formats: state lists, unitaries, source/experiment configs (JSON),
// count logs (JSONL, one CountRecord per line), fit reports (JSON) and CSV
// emitters. All numbers round-trip losslessly via nlohmann/json.

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsim/errors.hpp"
#include "qsim/pipeline.hpp"
#include "qsim/sources.hpp"
#include "qsim/states.hpp"

namespace qsim::io {

using nlohmann::json;

inline json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError("malformed JSON in " + what);
    return j;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write file: " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// state lists
// ---------------------------------------------------------------------------

/// A parsed state input: explicit photon states, or a bare Gram matrix (the
/// "ideal" variant). The Gram is always available.
struct StateInput {
    std::optional<std::vector<PhotonState>> states;
    Eigen::MatrixXcd gram;
    std::vector<std::string> labels;
};

inline StateInput parse_state_input(const json& j) {
    StateInput out;
    if (j.is_object() && j.contains("gram")) {
        const auto& g = j.at("gram");
        if (!g.is_array() || g.empty()) throw FormatError("gram must be a non-empty array");
        const int n = static_cast<int>(g.size());
        Eigen::MatrixXcd s(n, n);
        for (int i = 0; i < n; ++i) {
            if (!g[i].is_array() || static_cast<int>(g[i].size()) != n)
                throw FormatError("gram must be an n x n array");
            for (int k = 0; k < n; ++k) {
                const auto& e = g[i][k];
                if (!e.is_array() || e.size() != 2)
                    throw FormatError("gram entries must be [re, im] pairs");
                s(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
            }
        }
        out.gram = std::move(s);
        for (int i = 0; i < n; ++i) out.labels.push_back("s" + std::to_string(i + 1));
        if (j.contains("labels")) {
            const auto& labels = j.at("labels");
            for (int i = 0; i < n && i < static_cast<int>(labels.size()); ++i)
                out.labels[i] = labels[i].get<std::string>();
        }
        return out;
    }
    if (!j.is_array() || j.empty())
        throw FormatError("state list must be a non-empty array or an object with 'gram'");
    std::vector<PhotonState> states;
    for (const auto& e : j) {
        const auto& pol = e.at("polarization");
        if (!pol.is_array() || pol.size() != 4)
            throw FormatError("polarization must be [re_h, im_h, re_v, im_v]");
        const auto& temporal = e.at("temporal");
        PhotonState state;
        try {
            state.polarization =
                PolarizationState(Complex(pol[0].get<double>(), pol[1].get<double>()),
                                  Complex(pol[2].get<double>(), pol[3].get<double>()));
            state.temporal = GaussianWavepacket(temporal.at("center").get<double>(),
                                                temporal.at("sigma").get<double>(),
                                                temporal.value("carrier", 0.0));
        } catch (const json::exception& ex) {
            throw FormatError(std::string("bad state entry: ") + ex.what());
        }
        state.label = e.value("label", "s" + std::to_string(states.size() + 1));
        states.push_back(std::move(state));
    }
    for (const auto& s : states) out.labels.push_back(s.label);
    out.gram = gram_matrix(states).matrix();
    out.states = std::move(states);
    return out;
}

inline StateInput load_states(const std::string& path) {
    return parse_state_input(parse_json(read_file(path), path));
}

inline json state_input_to_json(const ExperimentStates& states) {
    json j;
    if (states.states) {
        j = json::array();
        for (const auto& s : *states.states) {
            j.push_back({{"label", s.label},
                         {"polarization",
                          {s.polarization.h.real(), s.polarization.h.imag(),
                           s.polarization.v.real(), s.polarization.v.imag()}},
                         {"temporal",
                          {{"center", s.temporal.center},
                           {"sigma", s.temporal.sigma},
                           {"carrier", s.temporal.carrier}}}});
        }
        return j;
    }
    json gram = json::array();
    for (int i = 0; i < states.gram.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < states.gram.cols(); ++k)
            row.push_back({states.gram(i, k).real(), states.gram(i, k).imag()});
        gram.push_back(std::move(row));
    }
    return json{{"gram", std::move(gram)}, {"labels", {"a", "b", "c", "d"}}};
}

// ---------------------------------------------------------------------------
// unitaries
// ---------------------------------------------------------------------------

inline Interferometer parse_unitary(const json& j) {
    int m = 0;
    try {
        m = j.at("m").get<int>();
    } catch (const json::exception& ex) {
        throw FormatError(std::string("bad unitary file: ") + ex.what());
    }
    const auto& rows = j.at("rows");
    if (!rows.is_array() || static_cast<int>(rows.size()) != m)
        throw FormatError("unitary must have m rows");
    Eigen::MatrixXcd u(m, m);
    for (int i = 0; i < m; ++i) {
        if (static_cast<int>(rows[i].size()) != m) throw FormatError("unitary row length != m");
        for (int k = 0; k < m; ++k) {
            const auto& e = rows[i][k];
            if (!e.is_array() || e.size() != 2)
                throw FormatError("unitary entries must be [re, im] pairs");
            u(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
        }
    }
    try {
        return Interferometer(std::move(u));
    } catch (const InvalidState& ex) {
        throw FormatError(std::string("unitary file: ") + ex.what());
    }
}

inline json unitary_to_json(const Interferometer& u) {
    json rows = json::array();
    for (int i = 0; i < u.modes(); ++i) {
        json row = json::array();
        for (int k = 0; k < u.modes(); ++k)
            row.push_back({u.entry(i, k).real(), u.entry(i, k).imag()});
        rows.push_back(std::move(row));
    }
    return json{{"m", u.modes()}, {"rows", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// configs
// ---------------------------------------------------------------------------

inline SourceConfig parse_source_config(const json& j) {
    SourceConfig cfg;
    try {
        cfg.lambda = j.value("lambda", cfg.lambda);
        cfg.spectral_factor = j.value("spectral_factor", cfg.spectral_factor);
        cfg.max_total_photons = j.value("max_total_photons", cfg.max_total_photons);
        cfg.spectral_cross_source_only =
            j.value("spectral_cross_source_only", cfg.spectral_cross_source_only);
        if (j.contains("eta_in")) {
            const auto& e = j.at("eta_in");
            if (e.size() != 4) throw FormatError("eta_in must have 4 entries");
            for (int i = 0; i < 4; ++i) cfg.eta_in[i] = e[i].get<double>();
        }
        if (j.contains("eta_out")) {
            const auto& e = j.at("eta_out");
            if (e.size() != 4) throw FormatError("eta_out must have 4 entries");
            for (int i = 0; i < 4; ++i) cfg.eta_out[i] = e[i].get<double>();
        }
    } catch (const json::exception& ex) {
        throw FormatError(std::string("bad source config: ") + ex.what());
    }
    try {
        cfg.validate();
    } catch (const InvalidState& ex) {
        throw FormatError(std::string("source config: ") + ex.what());
    }
    return cfg;
}

inline json source_config_to_json(const SourceConfig& cfg) {
    return json{{"lambda", cfg.lambda},
                {"eta_in", cfg.eta_in},
                {"eta_out", cfg.eta_out},
                {"spectral_factor", cfg.spectral_factor},
                {"max_total_photons", cfg.max_total_photons},
                {"spectral_cross_source_only", cfg.spectral_cross_source_only}};
}

inline ChiPolicy parse_chi_policy(const json& j) {
    if (j.is_string()) {
        const std::string kind = j.get<std::string>();
        if (kind == "uniform") return ChiPolicy::uniform();
        if (kind == "locked") return ChiPolicy::locked();
        throw FormatError("chi policy string must be 'uniform' or 'locked'");
    }
    const std::string kind = j.value("kind", "locked");
    if (kind == "uniform") return ChiPolicy::uniform();
    if (kind == "locked") return ChiPolicy::locked();
    if (kind == "fixed") return ChiPolicy::fixed(j.at("value").get<double>());
    if (kind == "window")
        return ChiPolicy::window(j.at("lo").get<double>(), j.at("hi").get<double>());
    throw FormatError("unknown chi policy kind: " + kind);
}

inline json chi_policy_to_json(const ChiPolicy& p) {
    switch (p.kind) {
        case ChiPolicyKind::Uniform: return json{{"kind", "uniform"}};
        case ChiPolicyKind::Locked: return json{{"kind", "locked"}};
        case ChiPolicyKind::Fixed: return json{{"kind", "fixed"}, {"value", p.value}};
        case ChiPolicyKind::Window:
            return json{{"kind", "window"}, {"lo", p.lo}, {"hi", p.hi}};
    }
    throw Error("unknown chi policy");
}

inline StateModel parse_state_model(const json& j) {
    StateModel m;
    const std::string mode = j.value("mode", "gaussian");
    if (mode == "ideal") {
        m.ideal = true;
        m.ideal_temporal_overlap = j.value("temporal_overlap", m.ideal_temporal_overlap);
        m.ideal_t23 = j.value("t23_overlap", m.ideal_t23);
    } else if (mode == "gaussian") {
        m.walkoff.sigma_ratio = j.value("sigma_ratio", m.walkoff.sigma_ratio);
        m.walkoff.sigma_short = j.value("sigma_short", m.walkoff.sigma_short);
        m.walkoff.t23_target = j.value("t23_target", m.walkoff.t23_target);
        m.walkoff.carrier = j.value("carrier", m.walkoff.carrier);
        m.walkoff.t1_center = j.value("t1_center", m.walkoff.t1_center);
    } else {
        throw FormatError("state model mode must be 'gaussian' or 'ideal'");
    }
    return m;
}

inline json state_model_to_json(const StateModel& m) {
    if (m.ideal) {
        return json{{"mode", "ideal"},
                    {"temporal_overlap", m.ideal_temporal_overlap},
                    {"t23_overlap", m.ideal_t23}};
    }
    return json{{"mode", "gaussian"},
                {"sigma_ratio", m.walkoff.sigma_ratio},
                {"sigma_short", m.walkoff.sigma_short},
                {"t23_target", m.walkoff.t23_target},
                {"carrier", m.walkoff.carrier},
                {"t1_center", m.walkoff.t1_center}};
}

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig cfg;
    // a bare SourceConfig file (keys lambda/eta_in/...) is accepted too
    if (j.is_object() && !j.contains("source") &&
        (j.contains("lambda") || j.contains("eta_in") || j.contains("spectral_factor") ||
         j.contains("max_total_photons"))) {
        cfg.source = parse_source_config(j);
        return cfg;
    }
    try {
        if (j.contains("source")) cfg.source = parse_source_config(j.at("source"));
        if (j.contains("states")) cfg.states = parse_state_model(j.at("states"));
        if (j.contains("chi_policy")) cfg.chi_policy = parse_chi_policy(j.at("chi_policy"));
        cfg.shots_per_point = j.value("shots_per_point", cfg.shots_per_point);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.sweeps = j.value("sweeps", cfg.sweeps);
        cfg.theta_points = j.value("theta_points", cfg.theta_points);
        cfg.noiseless = j.value("noiseless", cfg.noiseless);
        if (j.contains("sweep_scales"))
            cfg.sweep_scales = j.at("sweep_scales").get<std::vector<double>>();
        if (j.contains("perturbations")) {
            const auto& p = j.at("perturbations");
            if (p.contains("epsilon")) {
                const auto& e = p.at("epsilon");
                if (e.size() != 4) throw FormatError("perturbations.epsilon must have 4 entries");
                for (int i = 0; i < 4; ++i) cfg.perturbations.epsilon[i] = e[i].get<double>();
            }
            cfg.perturbations.r_ad_drift = p.value("r_ad_drift", 0.0);
        }
    } catch (const json::exception& ex) {
        throw FormatError(std::string("bad experiment config: ") + ex.what());
    }
    if (cfg.shots_per_point < 0) throw FormatError("shots_per_point must be >= 0");
    if (cfg.sweeps < 1) throw FormatError("sweeps must be >= 1");
    return cfg;
}

inline json experiment_config_to_json(const ExperimentConfig& cfg) {
    json j{{"source", source_config_to_json(cfg.source)},
           {"states", state_model_to_json(cfg.states)},
           {"chi_policy", chi_policy_to_json(cfg.chi_policy)},
           {"shots_per_point", cfg.shots_per_point},
           {"seed", cfg.seed},
           {"sweeps", cfg.sweeps},
           {"theta_points", cfg.theta_points},
           {"noiseless", cfg.noiseless}};
    if (!cfg.sweep_scales.empty()) j["sweep_scales"] = cfg.sweep_scales;
    if (cfg.perturbations.any()) {
        j["perturbations"] = json{{"epsilon", cfg.perturbations.epsilon},
                                  {"r_ad_drift", cfg.perturbations.r_ad_drift}};
    }
    return j;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(parse_json(read_file(path), path));
}

// ---------------------------------------------------------------------------
// count logs (JSONL)
// ---------------------------------------------------------------------------

/// Output subset key: concatenated detector labels 5-8, e.g. "57", "5678".
inline std::string subset_key(unsigned subset_mask) {
    std::string key;
    for (int j = 0; j < 4; ++j)
        if (subset_mask & (1u << j)) key += static_cast<char>('5' + j);
    return key;
}

inline unsigned subset_mask_from_key(const std::string& key) {
    unsigned mask = 0;
    for (char c : key) {
        if (c < '5' || c > '8') throw FormatError("bad output subset key: " + key);
        mask |= 1u << (c - '5');
    }
    return mask;
}

inline json count_record_to_json(const CountRecord& rec) {
    json counts = json::object();
    for (unsigned subset = 1; subset < 16; ++subset)
        counts[subset_key(subset)] = rec.counts[subset];
    std::vector<int> open;
    for (int i = 0; i < 4; ++i)
        if (rec.open_inputs & (1u << i)) open.push_back(i + 1);
    return json{{"sweep", rec.sweep},       {"theta_index", rec.theta_index},
                {"theta", rec.theta},       {"chi", rec.chi},
                {"open_inputs", open},      {"counts", std::move(counts)}};
}

inline CountRecord count_record_from_json(const json& j) {
    CountRecord rec;
    try {
        rec.sweep = j.at("sweep").get<int>();
        rec.theta_index = j.at("theta_index").get<int>();
        rec.theta = j.at("theta").get<double>();
        rec.chi = j.at("chi").get<double>();
        for (int port : j.at("open_inputs").get<std::vector<int>>()) {
            if (port < 1 || port > 4) throw FormatError("open_inputs ports must be 1..4");
            rec.open_inputs |= 1u << (port - 1);
        }
        for (const auto& [key, value] : j.at("counts").items()) {
            const double v = value.get<double>();
            if (v < 0.0) throw FormatError("counts must be nonnegative");
            rec.counts[subset_mask_from_key(key)] = v;
        }
    } catch (const json::exception& ex) {
        throw FormatError(std::string("bad count record: ") + ex.what());
    }
    return rec;
}

inline std::string records_to_jsonl(const std::vector<CountRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        out += count_record_to_json(rec).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<CountRecord> records_from_jsonl(const std::string& text) {
    std::vector<CountRecord> records;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(count_record_from_json(parse_json(line, "count log line")));
    }
    if (records.empty()) throw FormatError("count log contains no records");
    return records;
}

// ---------------------------------------------------------------------------
// reports and CSV emitters
// ---------------------------------------------------------------------------

inline json fit_to_json(const VisibilityFit& fit) {
    return json{{"a", fit.a},
                {"b", fit.b},
                {"a_stderr", fit.a_stderr},
                {"b_stderr", fit.b_stderr},
                {"visibility", fit.visibility},
                {"stderr", fit.visibility_stderr},
                {"points", fit.points}};
}

inline json fourfold_report_to_json(const FourfoldReport& report) {
    json window = nullptr;
    if (report.window) {
        window = json{{"lo", report.window->lo},
                      {"hi", report.window->hi},
                      {"complement", report.window->complement}};
    }
    auto series = [](const ChannelSeries& s) {
        return json{{"theta", s.theta}, {"mean", s.mean}, {"stderr", s.stderr_}};
    };
    return json{{"total_fit", fit_to_json(report.total_fit)},
                {"bgsub_fit", fit_to_json(report.bgsub_fit)},
                {"total", series(report.total)},
                {"bgsub", series(report.bgsub)},
                {"bg_aa", series(report.bg_aa)},
                {"bg_bb", series(report.bg_bb)},
                {"n_records", report.cells_used},
                {"chi_window", std::move(window)}};
}

inline std::string csv_number(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

inline std::string channel_series_csv(const ChannelSeries& s) {
    std::string out = "theta,mean,stderr\n";
    for (std::size_t i = 0; i < s.theta.size(); ++i) {
        out += csv_number(s.theta[i]) + "," + csv_number(s.mean[i]) + "," +
               csv_number(s.stderr_[i]) + "\n";
    }
    return out;
}

inline std::string exchange_table_csv(std::vector<ExchangeTerm> terms,
                                      const std::vector<std::string>& labels) {
    // identity first, then transpositions, 3-cycles, double transpositions,
    // 4-cycles — the usual table layout
    std::stable_sort(terms.begin(), terms.end(),
                     [](const ExchangeTerm& lhs, const ExchangeTerm& rhs) {
                         auto moved = [](const ExchangeTerm& t) {
                             int m = 0;
                             for (std::size_t i = 0; i < t.permutation.size(); ++i)
                                 if (t.permutation[i] != static_cast<int>(i)) ++m;
                             return m;
                         };
                         const int lm = moved(lhs), rm = moved(rhs);
                         if (lm != rm) return lm < rm;
                         if (lhs.cycle_type != rhs.cycle_type)
                             return lhs.cycle_type < rhs.cycle_type;
                         return lhs.cycle_notation() < rhs.cycle_notation();
                     });
    auto overlap_expr = [&](const ExchangeTerm& term) -> std::string {
        const int n = static_cast<int>(term.permutation.size());
        bool identity = true;
        std::string expr;
        // 2-cycles print as |<x|y>|^2; longer cycles as the bra-ket product
        std::vector<bool> seen(n, false);
        for (int start = 0; start < n; ++start) {
            if (seen[start] || term.permutation[start] == start) {
                seen[start] = true;
                continue;
            }
            identity = false;
            if (term.permutation[term.permutation[start]] == start) {
                expr += "|<" + labels[term.permutation[start]] + "|" + labels[start] + ">|^2";
                seen[start] = seen[term.permutation[start]] = true;
                continue;
            }
            int cur = start;
            while (!seen[cur]) {
                seen[cur] = true;
                expr += "<" + labels[cur] + "|" + labels[term.permutation[cur]] + ">";
                cur = term.permutation[cur];
            }
        }
        return identity ? "1" : expr;
    };

    std::string out = "cycle,coefficient_re,coefficient_im,overlap_expr,value\n";
    for (const auto& term : terms) {
        std::ostringstream value;
        value.precision(17);
        value << term.value.real();
        if (term.value.imag() != 0.0) {
            value << (term.value.imag() > 0 ? "+" : "") << term.value.imag() << "i";
        }
        out += term.cycle_notation() + "," + csv_number(term.coefficient.real()) + "," +
               csv_number(term.coefficient.imag()) + "," + overlap_expr(term) + "," +
               value.str() + "\n";
    }
    return out;
}

inline std::string prediction_table_csv(const PredictionReport& rep) {
    std::string out = "quantity,visibility\n";
    auto row = [&](const std::string& name, double v) {
        out += name + "," + csv_number(v) + "\n";
    };
    row("ideal_chi_half_pi", rep.ideal_vis_chi_half_pi);
    row("ideal_chi_zero", rep.ideal_vis_chi_zero);
    row("ideal_uniform_chi", rep.ideal_vis_uniform);
    row("states_chi_half_pi", rep.gaussian_vis_chi_half_pi);
    row("states_chi_zero", rep.gaussian_vis_chi_zero);
    row("states_uniform_chi", rep.gaussian_vis_uniform);
    row("states_policy_chi", rep.gaussian_vis_policy);
    row("total_predicted", rep.total_vis);
    row("bgsub_predicted", rep.bgsub_vis);
    row("window_total_predicted", rep.window_total_vis);
    row("window_bgsub_predicted", rep.window_bgsub_vis);
    row("complement_total_predicted", rep.complement_total_vis);
    row("complement_bgsub_predicted", rep.complement_bgsub_vis);
    row("sixphoton_correction_pp", rep.sixphoton_correction_pp);
    return out;
}

inline std::string visibility_curve_csv(const PredictionReport& rep) {
    std::string out = "chi,visibility\n";
    for (const auto& [chi, vis] : rep.visibility_curve)
        out += csv_number(chi) + "," + csv_number(vis) + "\n";
    return out;
}

}  // namespace qsim::io
