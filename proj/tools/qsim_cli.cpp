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

// qsim — simulator and analysis toolkit for multiphoton interference with
// partially distinguishable photons.
//
// Exit codes: 0 success, 2 flag errors, 3 file/format errors, 4 domain errors.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qsim/fock.hpp"
#include "qsim/io.hpp"
#include "qsim/pipeline.hpp"

namespace {

using namespace qsim;

double parse_angle(double value, bool degrees) {
    return degrees ? value * kPi / 180.0 : value;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        try {
            out.push_back(std::stoi(token));
        } catch (const std::exception&) {
            throw FormatError("bad integer list: " + text);
        }
    }
    return out;
}

struct PatternSpec {
    std::vector<int> input, output;
};

PatternSpec parse_pattern(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw FormatError("pattern must look like r1,..,rm:s1,..,sm");
    return {parse_int_list(text.substr(0, colon)), parse_int_list(text.substr(colon + 1))};
}

ChiPolicy parse_policy(const std::string& text, bool degrees) {
    if (text == "uniform") return ChiPolicy::uniform();
    if (text == "locked") return ChiPolicy::locked();
    if (text.rfind("fixed:", 0) == 0)
        return ChiPolicy::fixed(parse_angle(std::stod(text.substr(6)), degrees));
    if (text.rfind("window:", 0) == 0) {
        const std::string rest = text.substr(7);
        const auto colon = rest.find(':');
        if (colon == std::string::npos) throw FormatError("window policy needs lo:hi");
        return ChiPolicy::window(parse_angle(std::stod(rest.substr(0, colon)), degrees),
                                 parse_angle(std::stod(rest.substr(colon + 1)), degrees));
    }
    throw FormatError("chi policy must be uniform | locked | fixed:X | window:lo:hi");
}

ChiWindow parse_window(const std::string& text, bool degrees, bool complement) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw FormatError("chi window must look like lo:hi");
    ChiWindow w;
    w.lo = parse_angle(std::stod(text.substr(0, colon)), degrees);
    w.hi = parse_angle(std::stod(text.substr(colon + 1)), degrees);
    w.complement = complement;
    return w;
}

// Shared flags for commands that take a phase and a state preparation.
struct StateArgs {
    std::string states_file;
    double theta = 0.0;
    bool gaussian = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--states", states_file,
                        "State-list JSON file (or ideal {gram: ...} variant)");
        cmd->add_option("--theta", theta,
                        "Polarization angle for the built-in experiment states (radians)");
        cmd->add_flag("--gaussian", gaussian,
                      "Use Gaussian wavepacket defaults instead of the top-hat idealization");
    }

    /// Gram in photon order for the given input occupations, plus labels.
    std::pair<Eigen::MatrixXcd, std::vector<std::string>> gram_for(
        const std::vector<int>& input_occ, bool degrees) const {
        const double th = parse_angle(theta, degrees);
        if (!states_file.empty()) {
            const io::StateInput in = io::load_states(states_file);
            int n = 0;
            for (int v : input_occ) n += v;
            if (in.gram.rows() != n)
                throw FormatError("states file must provide exactly one state per photon (" +
                                  std::to_string(n) + " needed)");
            return {in.gram, in.labels};
        }
        const StateModel model{!gaussian, {}, 1.0 / std::sqrt(2.0), 0.0};
        const ExperimentStates st = model.make(th);
        std::vector<int> ids;
        for (int mode = 0; mode < static_cast<int>(input_occ.size()); ++mode)
            for (int k = 0; k < input_occ[mode]; ++k) ids.push_back(kPortState[mode]);
        const std::vector<std::string> names = {"a", "b", "c", "d"};
        std::vector<std::string> labels;
        for (int id : ids) labels.push_back(names[id]);
        return {expand_gram(st.gram, ids).matrix(), labels};
    }
};

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return ExperimentConfig{};
    return io::load_experiment_config(path);
}

int run(int argc, char** argv) {
    CLI::App app{"qsim — multiphoton interference with partially distinguishable photons"};
    app.require_subcommand(1);
    bool degrees = false;
    app.add_flag("--degrees", degrees, "Interpret angle arguments in degrees");

    // ---- prob ----
    auto* prob = app.add_subcommand("prob", "Transition or click probability");
    prob->fallthrough();
    double prob_chi = kPi / 2;
    std::string prob_paths, prob_pattern = "1,1,1,1:1,1,1,1", prob_engine = "permanent";
    std::string prob_unitary_file, prob_emit_unitary;
    StateArgs prob_states;
    auto* prob_chi_opt = prob->add_option("--chi", prob_chi, "Quitter phase chi");
    prob->add_option("--paths", prob_paths, "L1,L2,L3,L4,lambda0 path lengths instead of --chi");
    prob->add_option("--pattern", prob_pattern, "Occupations r1,..,rm:s1,..,sm");
    prob->add_option("--engine", prob_engine, "permanent | oracle")
        ->check(CLI::IsMember({"permanent", "oracle"}));
    prob->add_option("--unitary", prob_unitary_file, "Unitary JSON file instead of the quitter");
    prob->add_option("--emit-unitary", prob_emit_unitary, "Write the unitary used to this file");
    prob_states.add_to(prob);

    // ---- exchange-table ----
    auto* table = app.add_subcommand("exchange-table",
                                     "Exchange-cycle decomposition of P_1111 as CSV");
    table->fallthrough();
    double table_chi = kPi / 2;
    std::string table_out;
    StateArgs table_states;
    table->add_option("--chi", table_chi, "Quitter phase chi");
    table->add_option("--out", table_out, "Output CSV path (stdout if omitted)");
    table_states.add_to(table);

    // ---- hom ----
    auto* hom = app.add_subcommand("hom", "Phase-dependent HOM coincidence probability");
    hom->fallthrough();
    double hom_chi = 0.0, hom_r2 = 1.0;
    hom->add_option("--chi", hom_chi, "Quitter phase chi")->required();
    hom->add_option("--r2", hom_r2, "Squared overlap |<alpha|beta>|^2")->required();

    // ---- phases ----
    auto* phases = app.add_subcommand("phases", "Overlap moduli, arguments and collective phases");
    phases->fallthrough();
    std::string phases_indices;
    StateArgs phases_states;
    phases->add_option("--indices", phases_indices,
                       "1-based state indices i,j,k or i,j,k,l for a specific phase");
    phases_states.add_to(phases);

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "Theta sweep of noiseless fourfold probabilities");
    sweep->fallthrough();
    std::string sweep_policy = "locked", sweep_config, sweep_out;
    int sweep_points = 9;
    sweep->add_option("--chi-policy", sweep_policy, "uniform | locked | fixed:X | window:lo:hi");
    sweep->add_option("--points", sweep_points, "Number of theta points");
    sweep->add_option("--config", sweep_config, "Experiment config JSON");
    sweep->add_option("--out", sweep_out, "Output CSV path (stdout if omitted)");

    // ---- experiment-simulate ----
    auto* sim = app.add_subcommand("experiment-simulate", "Generate a synthetic count log");
    sim->fallthrough();
    std::string sim_config, sim_out;
    std::optional<std::uint64_t> sim_seed;
    sim->add_option("--config", sim_config, "Experiment config JSON");
    sim->add_option("--seed", sim_seed, "Override the config RNG seed");
    sim->add_option("--out", sim_out, "Output JSONL path")->required();

    // ---- experiment-analyze ----
    auto* analyze = app.add_subcommand("experiment-analyze", "Analyze a count log");
    analyze->fallthrough();
    std::string an_log, an_config, an_report, an_window, an_channels;
    bool an_outside = false;
    analyze->add_option("log", an_log, "Count log (JSONL)")->required();
    analyze->add_option("--config", an_config, "Experiment config JSON (for lambda)");
    analyze->add_option("--postselect-chi", an_window, "Postselection window lo:hi");
    analyze->add_flag("--outside", an_outside, "Postselect the complement of the window");
    analyze->add_option("--report", an_report, "Fit report JSON path (stdout if omitted)");
    analyze->add_option("--channels-out", an_channels,
                        "Prefix for normalized channel CSVs (singles/twofolds/threefolds)");

    // ---- predict ----
    auto* predict = app.add_subcommand("predict", "Visibility predictions and the vis(chi) curve");
    predict->fallthrough();
    std::string pred_config, pred_table, pred_curve;
    predict->add_option("--config", pred_config, "Experiment config JSON");
    predict->add_option("--table", pred_table, "Visibility table CSV path (stdout if omitted)");
    predict->add_option("--curve", pred_curve, "Visibility-vs-chi curve CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (*prob) {
        double chi = parse_angle(prob_chi, degrees);
        if (!prob_paths.empty()) {
            if (*prob_chi_opt) throw FormatError("--chi and --paths are mutually exclusive");
            std::vector<double> vals;
            std::istringstream in(prob_paths);
            std::string tok;
            while (std::getline(in, tok, ',')) vals.push_back(std::stod(tok));
            if (vals.size() != 5) throw FormatError("--paths needs L1,L2,L3,L4,lambda0");
            chi = chi_from_paths({vals[0], vals[1], vals[2], vals[3], vals[4]});
        }
        const PatternSpec pattern = parse_pattern(prob_pattern);
        const Interferometer u = prob_unitary_file.empty()
                                     ? quitter(chi)
                                     : io::parse_unitary(io::parse_json(
                                           io::read_file(prob_unitary_file), prob_unitary_file));
        if (!prob_emit_unitary.empty())
            io::write_file(prob_emit_unitary, io::unitary_to_json(u).dump(2) + "\n");
        const auto [gram, labels] = prob_states.gram_for(pattern.input, degrees);
        double p = 0.0;
        if (prob_engine == "oracle") {
            std::vector<int> ports;
            for (int mode = 0; mode < static_cast<int>(pattern.input.size()); ++mode)
                for (int k = 0; k < pattern.input[mode]; ++k) ports.push_back(mode);
            p = oracle::probability_exact(u, ports,
                                          oracle::orthonormalize_gram(gram).coefficients,
                                          pattern.output);
        } else {
            p = transition_probability(u, OccupationPattern(pattern.input, pattern.output),
                                       DistinguishabilityMatrix(gram));
        }
        std::printf("%.17g\n", p);
        return 0;
    }

    if (*table) {
        const double chi = parse_angle(table_chi, degrees);
        const std::vector<int> occ = {1, 1, 1, 1};
        const auto [gram, labels] = table_states.gram_for(occ, degrees);
        const auto terms = exchange_decomposition(quitter(chi), OccupationPattern(occ, occ),
                                                  DistinguishabilityMatrix(gram));
        const std::string csv = io::exchange_table_csv(terms, labels);
        if (table_out.empty()) std::fputs(csv.c_str(), stdout);
        else io::write_file(table_out, csv);
        return 0;
    }

    if (*hom) {
        std::printf("%.17g\n", hom_probability(hom_r2, parse_angle(hom_chi, degrees)));
        return 0;
    }

    if (*phases) {
        Eigen::MatrixXcd gram;
        std::vector<std::string> labels;
        if (!phases_states.states_file.empty()) {
            const io::StateInput in = io::load_states(phases_states.states_file);
            gram = in.gram;
            labels = in.labels;
        } else {
            // built-in experiment states in (a, b, c, d) order: the 1,2,3,4
            // cycle is the four-particle phase phi_abcd
            const StateModel model{!phases_states.gaussian, {}, 1.0 / std::sqrt(2.0), 0.0};
            gram = model.make(parse_angle(phases_states.theta, degrees)).gram;
            labels = {"a", "b", "c", "d"};
        }
        const DistinguishabilityMatrix s(gram);
        if (!phases_indices.empty()) {
            std::vector<int> idx = parse_int_list(phases_indices);
            for (int& v : idx) --v;
            if (idx.size() == 3) {
                std::printf("%.17g\n", triad_phase(s, idx[0], idx[1], idx[2]));
            } else if (idx.size() == 4) {
                std::printf("%.17g\n", four_particle_phase(s, idx[0], idx[1], idx[2], idx[3]));
            } else {
                throw FormatError("--indices needs 3 or 4 comma-separated indices");
            }
            return 0;
        }
        const int n = s.size();
        std::printf("# pairwise |S_ij| (lower) / arg S_ij (upper, radians)\n");
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (j) std::printf("  ");
                if (i == j) std::printf("%10s", labels[i].c_str());
                else if (i < j) std::printf("%10.6f", s.argument(i, j));
                else std::printf("%10.6f", s.modulus(i, j));
            }
            std::printf("\n");
        }
        std::printf("# triad phases (undefined edges -> '-')\n");
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = j + 1; k < n; ++k) {
                    std::printf("phi(%s,%s,%s) = ", labels[i].c_str(), labels[j].c_str(),
                                labels[k].c_str());
                    try {
                        std::printf("%.6f\n", triad_phase(s, i, j, k));
                    } catch (const UndefinedPhase&) {
                        std::printf("-\n");
                    }
                }
        if (n >= 4) {
            std::printf("# four-particle phase around (1,2,3,4)\n");
            try {
                std::printf("phi_abcd = %.6f\n", four_particle_phase(s, 0, 1, 2, 3));
            } catch (const UndefinedPhase&) {
                std::printf("phi_abcd = -\n");
            }
        }
        return 0;
    }

    if (*sweep) {
        ExperimentConfig cfg = load_config(sweep_config);
        cfg.chi_policy = parse_policy(sweep_policy, degrees);
        cfg.theta_points = sweep_points;
        const TwoSourceModel model(cfg.source, cfg.states, cfg.perturbations);
        SourceConfig four_only = cfg.source;
        four_only.max_total_photons = 4;
        const TwoSourceModel reduced(four_only, cfg.states, cfg.perturbations);
        const ChiMoments moments =
            ChiMoments::from_policy(cfg.chi_policy, cfg.source.max_total_photons);
        const ChiMoments moments4 = ChiMoments::from_policy(cfg.chi_policy, 4);
        const double in_situ = 1.0 / measured_background_scale(cfg.source.lambda);
        std::string csv = "theta,ab_only,total,bg_aa,bg_bb\n";
        for (double theta : theta_grid(cfg.theta_points)) {
            const double total = model.averaged_probability(kAllOpenMask, theta, moments, 0xF);
            const double aa =
                in_situ * model.averaged_probability(kSourceAMask, theta, moments, 0xF);
            const double bb =
                in_situ * model.averaged_probability(kSourceBMask, theta, moments, 0xF);
            const double ab_only =
                reduced.averaged_probability(kAllOpenMask, theta, moments4, 0xF) -
                in_situ * (reduced.averaged_probability(kSourceAMask, theta, moments4, 0xF) +
                           reduced.averaged_probability(kSourceBMask, theta, moments4, 0xF));
            csv += io::csv_number(theta) + "," + io::csv_number(ab_only) + "," +
                   io::csv_number(total) + "," + io::csv_number(aa) + "," +
                   io::csv_number(bb) + "\n";
        }
        if (sweep_out.empty()) std::fputs(csv.c_str(), stdout);
        else io::write_file(sweep_out, csv);
        return 0;
    }

    if (*sim) {
        ExperimentConfig cfg = load_config(sim_config);
        if (sim_seed) cfg.seed = *sim_seed;
        const auto records = simulate_sweep(cfg);
        io::write_file(sim_out, io::records_to_jsonl(records));
        std::fprintf(stderr, "wrote %zu records to %s\n", records.size(), sim_out.c_str());
        return 0;
    }

    if (*analyze) {
        const ExperimentConfig cfg = load_config(an_config);
        const auto records = io::records_from_jsonl(io::read_file(an_log));
        std::optional<ChiWindow> window;
        if (!an_window.empty()) window = parse_window(an_window, degrees, an_outside);
        const FourfoldReport report = analyze_fourfolds(records, cfg.source.lambda, window);
        const std::string text = io::fourfold_report_to_json(report).dump(2) + "\n";
        if (an_report.empty()) std::fputs(text.c_str(), stdout);
        else io::write_file(an_report, text);
        if (!an_channels.empty()) {
            std::string csv = "input,output,theta,mean,stderr\n";
            for (const auto& [key, series] : normalize_singles(records))
                for (std::size_t i = 0; i < series.theta.size(); ++i)
                    csv += std::to_string(key.first + 1) + "," + std::to_string(key.second + 5) +
                           "," + io::csv_number(series.theta[i]) + "," +
                           io::csv_number(series.mean[i]) + "," +
                           io::csv_number(series.stderr_[i]) + "\n";
            io::write_file(an_channels + "_singles.csv", csv);
            csv = "inputs,outputs,theta,mean,stderr\n";
            for (const auto& [key, series] : normalize_twofolds(records, cfg.source.lambda))
                for (std::size_t i = 0; i < series.theta.size(); ++i)
                    csv += std::to_string(key.first.first + 1) +
                           std::to_string(key.first.second + 1) + "," +
                           std::to_string(key.second.first + 5) +
                           std::to_string(key.second.second + 5) + "," +
                           io::csv_number(series.theta[i]) + "," +
                           io::csv_number(series.mean[i]) + "," +
                           io::csv_number(series.stderr_[i]) + "\n";
            io::write_file(an_channels + "_twofolds.csv", csv);
            csv = "inputs,outputs,theta,mean,stderr\n";
            for (const auto& [key, series] : normalize_threefolds(records, cfg.source.lambda))
                for (std::size_t i = 0; i < series.theta.size(); ++i)
                    csv += std::to_string(key.first[0] + 1) + std::to_string(key.first[1] + 1) +
                           std::to_string(key.first[2] + 1) + "," +
                           std::to_string(key.second[0] + 5) + std::to_string(key.second[1] + 5) +
                           std::to_string(key.second[2] + 5) + "," +
                           io::csv_number(series.theta[i]) + "," +
                           io::csv_number(series.mean[i]) + "," +
                           io::csv_number(series.stderr_[i]) + "\n";
            io::write_file(an_channels + "_threefolds.csv", csv);
        }
        return 0;
    }

    if (*predict) {
        const ExperimentConfig cfg = load_config(pred_config);
        const PredictionReport rep = predict_visibilities(cfg);
        const std::string csv = io::prediction_table_csv(rep);
        if (pred_table.empty()) std::fputs(csv.c_str(), stdout);
        else io::write_file(pred_table, csv);
        if (!pred_curve.empty()) io::write_file(pred_curve, io::visibility_curve_csv(rep));
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const qsim::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const qsim::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
