// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpq/analysis.hpp"
#include "fedpq/config.hpp"
#include "fedpq/engine.hpp"
#include "fedpq/objective.hpp"
#include "fedpq/optimizer.hpp"

namespace fedpq {

using ojson = nlohmann::ordered_json;

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"TFL", "FedDPQ", "FedDPQ-noDA", "FedDPQ-noPQ", "FedDPQ-noPC", "custom"};
    return names;
}

/// Strategy overrides per scenario. Overrides may leave the optimizer's box.
inline StrategyVector apply_scenario(const std::string& name, StrategyVector s, const Bounds& b) {
    const std::size_t U = s.size();
    if (name == "TFL") {
        s.rho.assign(U, 0.0);
        s.bits.assign(U, b.bits_max);
        s.delta_aug.assign(U, 0.0);
        s.p.assign(U, b.p_max);
    } else if (name == "FedDPQ-noDA") {
        s.delta_aug.assign(U, 0.0);
    } else if (name == "FedDPQ-noPQ") {
        s.rho.assign(U, 0.0);
        s.bits.assign(U, b.bits_max);
    } else if (name == "FedDPQ-noPC") {
        s.p.assign(U, b.p_min);
    } else if (name != "FedDPQ" && name != "custom") {
        throw std::invalid_argument("unknown scenario '" + name + "'");
    }
    return s;
}

/// Calibrated population and objective for one (pi, seed) cell.
struct Cell {
    Federation fed;
    CalibrationReport calibration;
    double epsilon = 0.0;
    std::shared_ptr<AnalyticObjective> objective;
};

inline Cell prepare_cell(const Config& cfg, double pi, std::uint64_t seed) {
    Cell cell;
    cell.fed = make_federation(cfg, pi, seed);
    ClassGradientTable table;
    if (cfg.calibrate) {
        cell.fed.constants = calibrate_constants(cell.fed, cfg.experiment.calibration_rounds, &cell.calibration);
        table = class_gradient_table(cell.fed, probe_trajectory(cell.fed, cfg.experiment.calibration_rounds, cell.fed.constants.eta));
    } else {
        const auto U = cell.fed.U();
        if (cell.fed.constants.Z2.size() != U || cell.fed.constants.grad_range2.size() != U)
            throw ValidationError("constants: Z2 and grad_range2 need one entry per device when calibration is off");
    }
    cell.epsilon = cfg.experiment.epsilon_auto
                       ? epsilon_from_accuracy(cell.fed, cfg.experiment.target_accuracy, cfg.experiment.round_cap)
                       : cfg.experiment.epsilon;
    cell.objective = std::make_shared<AnalyticObjective>(cell.fed.devices, cell.fed.constants, cfg.bounds, cfg.experiment.S,
                                                         cell.epsilon, cell.fed.V(), std::move(table),
                                                         10.0 * cfg.experiment.round_cap);
    return cell;
}

/// Default starting point: mid-range q, lightest compression and augmentation.
inline StrategyVector initial_strategy(const Config& cfg, const AnalyticObjective& obj) {
    if (cfg.has_strategy) {
        auto s = cfg.strategy;
        s.p.clear();
        return s;
    }
    const std::size_t U = obj.devices().size();
    StrategyVector s;
    s.q = 0.5 * (obj.q_lo() + obj.q_hi());
    s.delta_aug.assign(U, cfg.bounds.delta_aug_min);
    s.rho.assign(U, cfg.bounds.rho_min);
    s.bits.assign(U, cfg.bounds.bits_max);
    return s;
}

inline BcdResult optimize_cell(const Config& cfg, const Cell& cell, std::uint64_t seed) {
    const auto& o = cfg.optimizer;
    BcdProblem P;
    P.bounds = cfg.bounds;
    P.q_lo = cell.objective->q_lo();
    P.q_hi = cell.objective->q_hi();
    auto obj = cell.objective;
    P.objective = [obj](const StrategyVector& s) { return (*obj)(s); };
    BoSettings st;
    st.length_scale = o.length_scale;
    st.jitter = o.jitter;
    st.candidates = o.candidates;
    st.grid = o.q_grid;
    st.init_points = o.init_points;
    auto s = stream(seed, 0, 0, "optimize");
    auto init = initial_strategy(cfg, *cell.objective);
    init.q = std::clamp(init.q, P.q_lo, P.q_hi);
    auto r = bcd_optimize(init, P, o.eps_tol, o.r_max, {o.budget_q, o.budget_delta, o.budget_rho, o.budget_bits}, s, st);
    r.strategy.p.clear();
    return r;
}

struct ScenarioRun {
    std::string scenario;
    std::uint64_t seed = 0;
    double pi = 0.0;
    StrategyVector strategy;  // with powers filled in
    RunResult result;
};

inline RunSettings run_settings(const Config& cfg) {
    RunSettings rs;
    rs.round_cap = cfg.experiment.round_cap;
    rs.target_accuracy = cfg.experiment.target_accuracy;
    rs.accuracy_window = cfg.experiment.accuracy_window;
    return rs;
}

inline ScenarioRun run_scenario(const Config& cfg, const Cell& cell, const StrategyVector& base, const std::string& scenario) {
    ScenarioRun out;
    out.scenario = scenario;
    out.seed = cell.fed.seed;
    out.pi = cell.fed.pi;
    auto s = apply_scenario(scenario, base, cfg.bounds);
    Federation fed = cell.fed;
    augment(fed, s.delta_aug);
    auto dep = make_deployment(fed, s, cfg.bounds, cfg.experiment.S);
    out.strategy = dep.strategy;
    out.result = run_experiment(fed, dep, run_settings(cfg));
    return out;
}

// ---- metrics files ----

inline ojson round_record(const RoundTrace& tr, const std::string& scenario, std::uint64_t seed, double gen_total,
                          double cum) {
    ojson r;
    r["round"] = tr.round;
    r["scenario"] = scenario;
    r["seed"] = seed;
    r["loss"] = tr.loss;
    r["accuracy"] = tr.accuracy;
    r["energy_gen_total"] = gen_total;
    r["energy_tr_round"] = tr.energy_tr;
    r["energy_cu_round"] = tr.energy_cu;
    r["energy_cum"] = cum;
    r["skipped"] = tr.skipped;
    r["participants"] = tr.participants;
    r["outages"] = tr.alpha;
    return r;
}

inline ojson summary_record(const RunSummary& s) {
    ojson r;
    r["rounds_to_target"] = s.rounds_to_target;
    r["total_energy"] = s.total_energy;
    r["reached_target"] = s.reached_target;
    return r;
}

inline ojson header_record(const ScenarioRun& run) {
    const auto& sm = run.result.summary;
    ojson h;
    h["scenario"] = run.scenario;
    h["seed"] = run.seed;
    h["pi"] = run.pi;
    h["initial_loss"] = sm.initial_loss;
    h["initial_accuracy"] = sm.initial_accuracy;
    h["energy_gen_total"] = sm.energy_gen_total;
    h["rounds_run"] = sm.rounds_run;
    h["skipped_rounds"] = sm.skipped_rounds;
    h["effective_rounds"] = sm.effective_rounds;
    h["strategy"] = strategy_to_json(run.strategy);
    return h;
}

/// Writes header, one record per round, then the summary, as newline-delimited JSON.
inline void emit_metrics(const ScenarioRun& run, std::ostream& os) {
    const auto& sm = run.result.summary;
    os << header_record(run).dump() << '\n';
    CompensatedSum cum;
    cum.add(sm.energy_gen_total);
    for (const auto& tr : run.result.rounds) {
        cum.add(tr.energy_tr);
        cum.add(tr.energy_cu);
        os << round_record(tr, run.scenario, run.seed, sm.energy_gen_total, cum.value()).dump() << '\n';
    }
    os << summary_record(sm).dump() << '\n';
}

inline void emit_metrics(const ScenarioRun& run, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open metrics file " + path.string() + " for writing");
    emit_metrics(run, os);
    if (!os) throw std::runtime_error("write failed for metrics file " + path.string());
}

struct MetricsFile {
    json header;
    std::vector<json> rounds;
    RunSummary summary;
};

inline MetricsFile parse_metrics(std::istream& is) {
    MetricsFile m;
    std::string line;
    bool have_summary = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        if (j.contains("round"))
            m.rounds.push_back(std::move(j));
        else if (j.contains("rounds_to_target")) {
            m.summary.rounds_to_target = j.at("rounds_to_target").get<int>();
            m.summary.total_energy = j.at("total_energy").get<double>();
            m.summary.reached_target = j.at("reached_target").get<bool>();
            have_summary = true;
        } else
            m.header = std::move(j);
    }
    if (!have_summary) throw ParseError("metrics file has no summary record");
    return m;
}

inline MetricsFile parse_metrics(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open metrics file " + path.string());
    return parse_metrics(is);
}

inline std::string metrics_filename(const std::string& scenario, double pi, std::uint64_t seed) {
    std::ostringstream os;
    os << scenario << "_pi" << std::fixed << std::setprecision(2) << pi << "_seed" << seed << ".ndjson";
    return os.str();
}

// ---- sweeps ----

struct SweepRow {
    double pi = 0.0;
    std::uint64_t seed = 0;
    std::string scenario;
    RunSummary summary;
};

struct CellOutcome {
    BcdResult bcd;
    std::vector<ScenarioRun> runs;
};

inline CellOutcome run_cell(const Config& cfg, double pi, std::uint64_t seed, const std::vector<std::string>& scenarios) {
    CellOutcome out;
    auto cell = prepare_cell(cfg, pi, seed);
    out.bcd = optimize_cell(cfg, cell, seed);
    for (const auto& sc : scenarios) out.runs.push_back(run_scenario(cfg, cell, out.bcd.strategy, sc));
    return out;
}

/// Runs every (pi, seed) cell and scenario, writing one metrics file per run
/// plus sweep.ndjson. Cells run concurrently; outputs do not depend on scheduling.
inline std::vector<SweepRow> run_sweep(const Config& cfg, const std::filesystem::path& out_dir, unsigned workers = 0) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::pair<double, std::uint64_t>> cells;
    for (double pi : cfg.experiment.sweep_pi)
        for (auto seed : cfg.experiment.seeds) cells.emplace_back(pi, seed);
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<CellOutcome> outcomes(cells.size());
    for (std::size_t start = 0; start < cells.size(); start += workers) {
        std::vector<std::future<CellOutcome>> fut;
        for (std::size_t i = start; i < std::min(cells.size(), start + workers); ++i)
            fut.push_back(std::async(std::launch::async, [&, i] {
                return run_cell(cfg, cells[i].first, cells[i].second, cfg.experiment.sweep_scenarios);
            }));
        for (std::size_t i = 0; i < fut.size(); ++i) outcomes[start + i] = fut[i].get();
    }
    std::vector<SweepRow> rows;
    std::ofstream sweep(out_dir / "sweep.ndjson");
    if (!sweep) throw std::runtime_error("cannot open " + (out_dir / "sweep.ndjson").string() + " for writing");
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (const auto& run : outcomes[i].runs) {
            emit_metrics(run, out_dir / metrics_filename(run.scenario, run.pi, run.seed));
            rows.push_back({run.pi, run.seed, run.scenario, run.result.summary});
            ojson r;
            r["pi"] = run.pi;
            r["seed"] = run.seed;
            r["scenario"] = run.scenario;
            r["rounds_to_target"] = run.result.summary.rounds_to_target;
            r["total_energy"] = run.result.summary.total_energy;
            r["reached_target"] = run.result.summary.reached_target;
            r["objective_H"] = outcomes[i].bcd.H;
            sweep << r.dump() << '\n';
        }
    return rows;
}

// ---- reports ----

/// Participation weights, exact when the enumeration is small enough.
inline ParticipationWeights participation_weights(const std::vector<double>& tau, const std::vector<double>& q, int S,
                                                  std::uint64_t seed, long mc_trials = 200000) {
    if (std::pow(static_cast<double>(tau.size()), S) <= kEnumerationLimit) return enumerate_weights(tau, q, S);
    auto s = stream(seed, 0, 0, "weights");
    return monte_carlo_weights(tau, q, S, mc_trials, s);
}

inline ojson bound_record(const BoundReport& r, const ParticipationWeights& w) {
    ojson j;
    j["gap_term"] = r.gap_term;
    j["chi2_term"] = r.chi2_term;
    j["alpha_z2_term"] = r.alpha_z2_term;
    j["pruning_term"] = r.pruning_term;
    j["quantization_term"] = r.quantization_term;
    j["dispersion_term"] = r.dispersion_term;
    j["sigma2_term"] = r.sigma2_term;
    j["total"] = r.total;
    j["chi2"] = r.chi2;
    j["denominator"] = r.denominator;
    j["Psi"] = r.Psi;
    j["Omega"] = r.Omega;
    j["omega_feasible"] = r.omega_feasible;
    j["uniform_q"] = r.uniform_q;
    j["weights_method"] = to_string(w.method);
    return j;
}

}  // namespace fedpq
