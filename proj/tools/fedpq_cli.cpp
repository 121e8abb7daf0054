// SPDX-License-Identifier: Apache-2.0
// Command-line front end: simulate, optimize, bound, calibrate, sweep.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fedpq/fedpq.hpp"

namespace {

using namespace fedpq;

struct Common {
    std::string config;
    std::uint64_t seed = 1;
    std::string out;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_out) {
    sub->add_option("--config", c.config, "configuration file (JSON)")->required();
    sub->add_option("--seed", c.seed, "experiment seed")->capture_default_str();
    c.out = default_out;
    sub->add_option("--out", c.out, "output path")->capture_default_str();
}

std::ofstream open_out(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    return os;
}

/// Strategy for a single run: the configured one, or the optimized one.
StrategyVector base_strategy(const Config& cfg, const Cell& cell, std::uint64_t seed) {
    if (cfg.has_strategy || cfg.experiment.scenario == "TFL") return initial_strategy(cfg, *cell.objective);
    return optimize_cell(cfg, cell, seed).strategy;
}

int cmd_simulate(const Common& c) {
    auto cfg = load_config(c.config);
    auto cell = prepare_cell(cfg, cfg.experiment.pi, c.seed);
    auto run = run_scenario(cfg, cell, base_strategy(cfg, cell, c.seed), cfg.experiment.scenario);
    auto os = open_out(c.out);
    emit_metrics(run, os);
    const auto& s = run.result.summary;
    std::cout << fmt::format("{} seed={} rounds_to_target={} reached={} total_energy={:.6g} J\n", run.scenario, c.seed,
                             s.rounds_to_target, s.reached_target, s.total_energy);
    return 0;
}

int cmd_optimize(const Common& c, bool validate) {
    auto cfg = load_config(c.config);
    auto cell = prepare_cell(cfg, cfg.experiment.pi, c.seed);
    auto r = optimize_cell(cfg, cell, c.seed);
    auto os = open_out(c.out);
    for (const auto& row : r.trace) {
        ojson j;
        j["iteration"] = row.iteration;
        j["block"] = row.block;
        j["point"] = row.point;
        j["objective"] = row.block_value;
        j["accepted"] = row.accepted;
        j["best"] = row.best;
        os << j.dump() << '\n';
    }
    auto ev = cell.objective->evaluate(r.strategy);
    ojson fin;
    fin["iterations"] = r.iterations;
    fin["H"] = r.H;
    fin["Omega"] = ev.Omega;
    fin["omega_feasible"] = ev.omega_feasible;
    fin["power_feasible"] = ev.power_feasible;
    fin["strategy"] = strategy_to_json(r.strategy);
    if (validate) {
        auto run = run_scenario(cfg, cell, r.strategy, "FedDPQ");
        fin["validation"] = summary_record(run.result.summary);
    }
    os << fin.dump() << '\n';
    std::cout << fmt::format("H*={:.6g} J after {} BCD iterations (Omega={})\n", r.H, r.iterations, ev.Omega);
    return 0;
}

int cmd_bound(const Common& c) {
    auto cfg = load_config(c.config);
    auto cell = prepare_cell(cfg, cfg.experiment.pi, c.seed);
    auto s = initial_strategy(cfg, *cell.objective);
    auto ev = cell.objective->evaluate(s);
    const auto& fleet = cell.objective->fleet(s.q);
    Federation fed = cell.fed;
    augment(fed, s.delta_aug);
    std::vector<double> q_u;
    for (const auto& ch : fleet) q_u.push_back(ch.q);
    auto w = participation_weights(fed.tau, q_u, cfg.experiment.S, c.seed);
    auto k = fed.constants;
    const double Omega = ev.omega_feasible ? ev.Omega : cfg.experiment.round_cap;
    auto rep = evaluate_bound(k, w, s, fed.tau, q_u, cfg.experiment.S, Omega);
    auto rr = rounds_to_epsilon(k, s, fed.tau, cfg.experiment.S, cell.epsilon);
    rep.Psi = rr.Psi;
    rep.Omega = rr.feasible ? rr.Omega : -1;
    rep.omega_feasible = rr.feasible;
    auto rec = bound_record(rep, w);
    std::cout << fmt::format("{:<20}{:>16}\n", "term", "value");
    for (auto it = rec.begin(); it != rec.end(); ++it) std::cout << fmt::format("{:<20}{:>16}\n", it.key(), it.value().dump());
    auto os = open_out(c.out);
    os << rec.dump() << '\n';
    return 0;
}

int cmd_calibrate(const Common& c) {
    auto cfg = load_config(c.config);
    auto fed = make_federation(cfg, cfg.experiment.pi, c.seed);
    CalibrationReport rep;
    calibrate_constants(fed, cfg.experiment.calibration_rounds, &rep);
    ojson j;
    j["probes"] = rep.probes;
    j["L"] = rep.L;
    j["sigma2"] = rep.sigma2;
    j["Gamma2"] = rep.Gamma2;
    j["loss_gap"] = rep.loss_gap;
    j["Z2"] = rep.Z2;
    j["grad_range2"] = rep.grad_range2;
    auto os = open_out(c.out);
    os << j.dump() << '\n';
    double zmax = 0.0, rmax = 0.0;
    for (double z : rep.Z2) zmax = std::max(zmax, z);
    for (double r : rep.grad_range2) rmax = std::max(rmax, r);
    std::cout << fmt::format("L={:.6g} sigma2={:.6g} Gamma2={:.6g} loss_gap={:.6g} max Z2={:.6g} max range2={:.6g}\n",
                             rep.L, rep.sigma2, rep.Gamma2, rep.loss_gap, zmax, rmax);
    std::cout << "(empirical lower bounds on the true suprema)\n";
    return 0;
}

int cmd_sweep(const Common& c, unsigned workers) {
    auto cfg = load_config(c.config);
    auto rows = run_sweep(cfg, c.out, workers);
    for (const auto& r : rows)
        std::cout << fmt::format("pi={:.2f} seed={} {:<12} rounds={:>5} reached={} energy={:.6g} J\n", r.pi, r.seed,
                                 r.scenario, r.summary.rounds_to_target, r.summary.reached_target, r.summary.total_energy);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-aware federated learning simulator and strategy optimizer"};
    app.require_subcommand(1);
    Common sim, opt, bnd, cal, swp;
    bool validate = false;
    unsigned workers = 0;
    auto* s_sim = app.add_subcommand("simulate", "run one experiment and write per-round metrics");
    add_common(s_sim, sim, "metrics.ndjson");
    auto* s_opt = app.add_subcommand("optimize", "search the strategy space and write the BCD trace");
    add_common(s_opt, opt, "optimize.ndjson");
    s_opt->add_flag("--validate", validate, "re-score the optimized strategy by simulation");
    auto* s_bnd = app.add_subcommand("bound", "print the convergence-bound terms for the configured strategy");
    add_common(s_bnd, bnd, "bound.json");
    auto* s_cal = app.add_subcommand("calibrate", "estimate analysis constants from probe rounds");
    add_common(s_cal, cal, "calibration.json");
    auto* s_swp = app.add_subcommand("sweep", "run every scenario over the configured pi values and seeds");
    add_common(s_swp, swp, "sweep");
    s_swp->add_option("--workers", workers, "concurrent cells (0 = hardware threads)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) std::cerr << app.help();
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        if (*s_sim) return cmd_simulate(sim);
        if (*s_opt) return cmd_optimize(opt, validate);
        if (*s_bnd) return cmd_bound(bnd);
        if (*s_cal) return cmd_calibrate(cal);
        if (*s_swp) return cmd_sweep(swp, workers);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
