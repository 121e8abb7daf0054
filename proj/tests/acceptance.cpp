// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is the
// number of failures. Pass criterion numbers as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "helpers.hpp"

using namespace fedpq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

void fail(Outcome& o, const std::string& why) {
    if (o.pass) o.detail = why;
    o.pass = false;
}

// ---- 1, 2: quantization ----

std::vector<std::vector<double>> gradient_vectors(int n, std::size_t V) {
    std::vector<std::vector<double>> out;
    for (int i = 0; i < n; ++i) {
        auto s = stream(101, 0, i, "acceptance-vectors");
        const double scale = std::exp(4.0 * s.uniform() - 2.0);
        std::vector<double> g(V);
        for (auto& x : g) x = scale * s.normal();
        out.push_back(std::move(g));
    }
    return out;
}

Outcome quantization_unbiased() {
    Outcome o;
    const auto vecs = gradient_vectors(100, 64);
    const long draws = 100000;
    double worst = 0.0;
    int exceed = 0;
    for (int bits : {1, 4, 8}) {
        for (std::size_t i = 0; i < vecs.size(); ++i) {
            const auto& g = vecs[i];
            auto s = stream(202, bits, static_cast<std::int64_t>(i), "acceptance-quantize");
            std::vector<double> m1(g.size(), 0.0), m2(g.size(), 0.0);
            for (long d = 0; d < draws; ++d) {
                const auto q = quantize(g, bits, s);
                const LevelGrid grid(q.lo, q.hi, q.max_level());
                for (std::size_t v = 0; v < g.size(); ++v) {
                    const double e = grid.at(q.levels[v]) - g[v];
                    m1[v] += e;
                    m2[v] += e * e;
                }
            }
            const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
            const double n = static_cast<double>(draws);
            for (std::size_t v = 0; v < g.size(); ++v) {
                const double mean = m1[v] / n;
                const double se = std::sqrt(std::max(m2[v] / n - mean * mean, 0.0) / (n - 1));
                // deterministic elements (range endpoints) must be exact up to rounding
                const double z = se > 0 ? std::abs(mean) / se : (std::abs(mean) <= 1e-12 * (*hi - *lo) ? 0.0 : INFINITY);
                worst = std::max(worst, z);
                if (z > 4.0) {
                    ++exceed;
                    if (o.pass)
                        fail(o, fmt::format("vector {} element {} bits {}: |mean error| = {:.3g} SE", i, v, bits, z));
                }
            }
        }
    }
    o.detail = fmt::format("19200 elements, max {:.2f} SE, {} beyond 4 SE", worst, exceed) +
               (o.pass ? "" : " (first: " + o.detail + ")");
    return o;
}

Outcome quantization_error_bound_holds() {
    Outcome o;
    const auto vecs = gradient_vectors(100, 64);
    const long draws = 20000;
    double worst_ratio = 0.0;
    for (int bits : {1, 4, 8}) {
        for (std::size_t i = 0; i < vecs.size(); ++i) {
            const auto& g = vecs[i];
            auto s = stream(303, bits, static_cast<std::int64_t>(i), "acceptance-mse");
            double sse = 0.0;
            for (long d = 0; d < draws; ++d) sse += squared_distance(dequantize(quantize(g, bits, s)), g);
            const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
            const double bound = quantization_error_bound(g.size(), *lo, *hi, bits);
            const double mse = sse / static_cast<double>(draws);
            worst_ratio = std::max(worst_ratio, mse / bound);
            if (mse > bound) fail(o, fmt::format("vector {} bits {}: MSE {:.4g} > bound {:.4g}", i, bits, mse, bound));
        }
    }
    if (o.pass) o.detail = fmt::format("max MSE/bound = {:.4f} over 300 (vector, bits) pairs", worst_ratio);
    return o;
}

// ---- 3: participation weights ----

Outcome participation_weights_check() {
    Outcome o;
    const std::vector<std::pair<int, int>> cases{{2, 2}, {3, 2}, {4, 3}};
    double worst_z = 0.0, worst_sum = 0.0, worst_uniform = 0.0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto [U, S] = cases[c];
        auto s = stream(404, 0, static_cast<std::int64_t>(c), "acceptance-weights");
        std::vector<double> tau(static_cast<std::size_t>(U)), q(static_cast<std::size_t>(U));
        double t = 0.0;
        for (auto& x : tau) t += (x = 0.2 + s.uniform());
        for (auto& x : tau) x /= t;
        for (auto& x : q) x = 0.05 + 0.6 * s.uniform();
        auto exact = enumerate_weights(tau, q, S);
        auto ms = stream(405, 0, static_cast<std::int64_t>(c), "acceptance-weights-mc");
        auto mc = monte_carlo_weights(tau, q, S, 10000000, ms);
        for (std::size_t u = 0; u < tau.size(); ++u) {
            const double zb = std::abs(exact.beta_bar[u] - mc.beta_bar[u]) / mc.beta_se[u];
            const double za = std::abs(exact.alpha_bar[u] - mc.alpha_bar[u]) / mc.alpha_se[u];
            worst_z = std::max({worst_z, zb, za});
            if (zb > 3 || za > 3)
                fail(o, fmt::format("(U,S)=({},{}) device {}: beta {:.2f} SE, alpha {:.2f} SE", U, S, u, zb, za));
        }
        double sum = 0.0;
        for (double b : exact.beta_bar) sum += b;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        if (std::abs(sum - 1.0) > 1e-10) fail(o, fmt::format("(U,S)=({},{}): sum beta = {:.17g}", U, S, sum));

        const double qu = q[0];
        auto uni = enumerate_weights(tau, std::vector<double>(tau.size(), qu), S);
        const double sb = s_bar(qu, S);
        for (std::size_t u = 0; u < tau.size(); ++u) {
            const double db = std::abs(uni.beta_bar[u] - tau[u]);
            const double da = std::abs(uni.alpha_bar[u] - tau[u] / sb);
            worst_uniform = std::max({worst_uniform, db, da});
            if (db > 1e-10 || da > 1e-10) fail(o, fmt::format("(U,S)=({},{}) uniform q: off by {:.3g}", U, S, std::max(db, da)));
        }
    }
    if (o.pass)
        o.detail = fmt::format("max {:.2f} SE vs 1e7 trials, |sum beta - 1| <= {:.1g}, uniform-q error {:.1g}", worst_z,
                               worst_sum, worst_uniform);
    return o;
}

// ---- 4: channel ----

Outcome channel_consistency() {
    Outcome o;
    double worst_q = 0.0;
    for (int i = 0; i <= 80; ++i) {
        const double a = std::pow(10.0, -5.0 + 7.0 * i / 80.0);
        const double d = std::abs(error_probability_from_a(a) - error_probability_bessel(a));
        worst_q = std::max(worst_q, d);
        if (d > 1e-6) fail(o, fmt::format("a = {:.3g}: quadrature and Bessel differ by {:.3g}", a, d));
    }
    const auto cfg = load_config(fs::path(FEDPQ_CONFIG_DIR) / "default.json");
    const auto& k = cfg.constants;
    const auto& b = cfg.bounds;
    const auto& devs = cfg.devices;
    double worst_p = 0.0;
    auto s = stream(505, 0, 0, "acceptance-power");
    for (const auto& d : devs) {
        const double p0 = b.p_min + (b.p_max - b.p_min) * (0.02 + 0.96 * s.uniform());
        auto sol = solve_power_for_q(d, error_probability(d, p0, k), k, b);
        const double e = std::abs(sol.p - p0);
        worst_p = std::max(worst_p, e);
        if (e > 1e-6) fail(o, fmt::format("device {}: p {:.9g} -> {:.9g}", d.id, p0, sol.p));
    }
    // The default device spreads admit no q reachable by all 100 devices, so check each
    // device: reachable targets are hit, unreachable ones clamp to a power bound.
    double q_lo = 0.0, q_hi = 0.0;
    for (const auto& d : devs) {
        q_lo = std::max(q_lo, error_probability(d, b.p_max, k));
        q_hi = std::max(q_hi, error_probability(d, b.p_min, k));
    }
    double worst_fleet = 0.0;
    int hit = 0, clamped = 0;
    for (int i = 0; i <= 10; ++i) {
        const double q = q_lo + (q_hi - q_lo) * i / 10.0;
        for (const auto& c : solve_fleet(devs, q, k, b)) {
            if (c.feasible) {
                ++hit;
                worst_fleet = std::max(worst_fleet, std::abs(c.q - q));
            } else {
                ++clamped;
                const bool ok = (c.p == b.p_min && c.q <= q) || (c.p == b.p_max && c.q >= q);
                if (!ok) fail(o, fmt::format("device {} at q {:.4g}: infeasible but p = {:.6g}, q_u = {:.6g}", c.device, q, c.p, c.q));
            }
        }
    }
    if (!(worst_fleet < 1e-9)) fail(o, fmt::format("fleet max |q_u - q| = {:.3g}", worst_fleet));
    if (o.pass)
        o.detail = fmt::format("quadrature vs Bessel {:.2g}, power round trip {:.2g}, fleet |q_u - q| {:.2g} ({} solved, {} clamped)",
                               worst_q, worst_p, worst_fleet, hit, clamped);
    return o;
}

// ---- 5: aggregation unbiasedness ----

Outcome aggregation_unbiased() {
    Outcome o;
    auto j = json::parse(fedpq::testing::slurp(fs::path(FEDPQ_CONFIG_DIR) / "small.json"));
    j["devices"]["count"] = 5;
    auto cfg = parse_config(j);
    auto fed = make_federation(cfg, 0.6, 1);
    augment(fed, std::vector<double>(5, 0.2));
    auto w = fed.model->initial();
    auto s = stream(606, 0, 0, "acceptance-probe-w");
    for (auto& x : w) x = 0.1 * s.normal();
    auto rep = unbiasedness_probe(fed, w, cfg.experiment.S, 100000, 606);
    if (!(rep.max_z <= 4.0)) fail(o, fmt::format("max deviation {:.2f} SE", rep.max_z));
    if (o.pass) o.detail = fmt::format("U=5, S={}, {} components, max {:.2f} SE", cfg.experiment.S, rep.deviation.size(), rep.max_z);
    return o;
}

// ---- 6: energy model ----

struct EnergyOracle {
    // Plain arithmetic, written out independently of the library formulas.
    static double training(double b, double c_tr, double rho, double f, double varrho, double g) {
        const double seconds = b * c_tr * (1 - rho) / f;
        return varrho * std::pow(f, g) * seconds;
    }
    static double upload(double V, double bits, double o, double p, double rate) { return p * (V * bits + o) / rate; }
    static double generation(double n, double c_gen, double f, double varrho, double g) {
        return varrho * std::pow(f, g) * n * c_gen / f;
    }
};

bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); }

Outcome energy_model() {
    Outcome o;
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
        auto s = stream(707, 0, c, "acceptance-energy");
        const auto U = 1 + s.index(8);
        auto devs = random_devices(U, 100 + static_cast<std::uint64_t>(c));
        SystemConstants k;
        k.b = 1 + static_cast<int>(s.index(64));
        k.c_tr = 1e8 * (1 + 4 * s.uniform());
        k.c_gen = 1e8 * (1 + 4 * s.uniform());
        k.o_bits = static_cast<int>(s.index(128));
        const std::size_t V = 10 + s.index(5000);
        const double Omega = std::floor(1 + 500 * s.uniform());
        StrategyVector st;
        std::vector<double> rates;
        std::vector<AugmentationPlan> plans;
        for (std::size_t u = 0; u < U; ++u) {
            st.rho.push_back(0.3 * s.uniform());
            st.bits.push_back(1 + static_cast<int>(s.index(16)));
            st.p.push_back(0.01 + 0.09 * s.uniform());
            st.delta_aug.push_back(0.4 * s.uniform());
            rates.push_back(1e5 + 5e6 * s.uniform());
            std::vector<long> counts;
            for (int cl = 0; cl < 5; ++cl) counts.push_back(static_cast<long>(s.index(40)));
            counts[0] += 1;
            plans.push_back(plan_augmentation(counts, st.delta_aug.back()));
        }
        double mix_total = 0.0;
        for (const auto& p : plans)
            for (long m : p.mix) mix_total += static_cast<double>(m);
        long double expect_round = 0.0L, expect_gen = 0.0L;
        for (std::size_t u = 0; u < U; ++u) {
            const auto& d = devs[u];
            const double etr = EnergyOracle::training(k.b, k.c_tr, st.rho[u], d.f, k.varrho, k.gamma_exp);
            const double ecu = EnergyOracle::upload(static_cast<double>(V), st.bits[u], k.o_bits, st.p[u], rates[u]);
            auto e = round_energy(d, st.rho[u], st.bits[u], st.p[u], rates[u], k, V);
            for (auto [got, want] : {std::pair{e.E_tr, etr}, std::pair{e.E_cu, ecu}}) {
                worst = std::max(worst, std::abs(got - want) / want);
                if (!rel_close(got, want, 1e-9)) fail(o, fmt::format("config {} device {}: {:.12g} vs {:.12g}", c, u, got, want));
            }
            double mix = 0.0;
            for (long m : plans[u].mix) mix += static_cast<double>(m);
            expect_round += static_cast<long double>(mix / mix_total * (etr + ecu));
            expect_gen += EnergyOracle::generation(static_cast<double>(plans[u].total_gen), k.c_gen, d.f, k.varrho, k.gamma_exp);
        }
        const double want = static_cast<double>(Omega * expect_round + expect_gen);
        const double got = total_energy(devs, st, k, Omega, V, plans, rates);
        worst = std::max(worst, std::abs(got - want) / want);
        if (!rel_close(got, want, 1e-9)) fail(o, fmt::format("config {}: H {:.12g} vs oracle {:.12g}", c, got, want));
    }

    // Grid monotonicity at a fixed round count.
    auto devs = random_devices(6, 11);
    SystemConstants k;
    Bounds b;
    std::vector<AugmentationPlan> plans;
    for (int u = 0; u < 6; ++u) plans.push_back(plan_augmentation({20 + 3 * u, 5, 11, 2}, 0.25));
    StrategyVector base = fedpq::testing::plain_strategy(6, 8);
    base.rho.assign(6, 0.15);
    base.p.assign(6, 0.05);
    int checks = 0;
    for (std::size_t u = 0; u < 6; ++u) {
        double prev = INFINITY;
        for (int i = 0; i <= 20; ++i) {
            auto t = base;
            t.rho[u] = b.rho_min + (b.rho_max - b.rho_min) * i / 20.0;
            const double h = total_energy(devs, t, k, 200, 7850, plans);
            if (h > prev) fail(o, fmt::format("H increases in rho[{}] at {:.3f}", u, t.rho[u]));
            prev = h;
            ++checks;
        }
        prev = -INFINITY;
        for (int bits = b.bits_min; bits <= b.bits_max; ++bits) {
            auto t = base;
            t.bits[u] = bits;
            const double h = total_energy(devs, t, k, 200, 7850, plans);
            if (h < prev) fail(o, fmt::format("H decreases in bits[{}] at {}", u, bits));
            prev = h;
            ++checks;
        }
    }
    if (o.pass) o.detail = fmt::format("20 configurations, max relative error {:.2g}; {} grid points monotone", worst, checks);
    return o;
}

// ---- 7: bound machinery ----

SystemConstants bound_constants(std::size_t U, Stream& s) {
    SystemConstants k;
    k.L = 0.5 + s.uniform();
    k.eta = (0.2 + 0.7 * s.uniform()) / (16 * k.L);
    k.sigma2 = s.uniform();
    k.Gamma2 = 1 + 10 * s.uniform();
    k.loss_gap = 0.5 + 2 * s.uniform();
    k.Z2.clear();
    k.grad_range2.clear();
    for (std::size_t u = 0; u < U; ++u) {
        k.Z2.push_back(s.uniform());
        k.grad_range2.push_back(1 + 50 * s.uniform());
    }
    return k;
}

// Independent scalar evaluation of the minimal round count.
long long omega_oracle(const SystemConstants& k, const StrategyVector& st, const std::vector<double>& tau, int S, double eps,
                       bool& feasible) {
    const double q = st.q;
    double num = 0.0, den = 0.0;
    for (int j = 1; j <= S; ++j) {
        double c = 1.0;
        for (int i = 1; i <= j; ++i) c = c * (S - j + i) / i;
        den += c * std::pow(1 - q, j) * std::pow(q, S - j) / j;
    }
    num = 1 - std::pow(q, S);
    const double sbar = num / den;
    double tt = 0, rs = 0, tr = 0, qt = 0, tz = 0;
    for (std::size_t u = 0; u < tau.size(); ++u) {
        const double levels = std::pow(2.0, st.bits[u]) - 1;
        tt += tau[u] * tau[u];
        rs += st.rho[u];
        tr += tau[u] * st.rho[u];
        qt += tau[u] / sbar * k.grad_range2[u] / (4 * levels * levels);
        tz += tau[u] / sbar * k.Z2[u];
    }
    const double L = k.L, e = k.eta;
    const double psi = e * L * L * k.Gamma2 * (tt * rs + 4 * e * L * tr) + L * e * e * qt + 2 * L * e * e * (k.sigma2 / sbar + 4 * tz);
    const double gap = (e / 2 - 8 * L * e * e) * eps - psi;
    feasible = gap > 0;
    return feasible ? static_cast<long long>(std::ceil(k.loss_gap / gap)) : -1;
}

Outcome bound_machinery() {
    Outcome o;
    int omega_checks = 0, uniform_checks = 0;
    for (int c = 0; c < 50; ++c) {
        auto s = stream(808, 0, c, "acceptance-bound");
        const std::size_t U = 2 + s.index(6);
        const int S = 1 + static_cast<int>(s.index(6));
        auto k = bound_constants(U, s);
        std::vector<double> tau(U);
        double t = 0;
        for (auto& x : tau) t += (x = 0.1 + s.uniform());
        for (auto& x : tau) x /= t;
        StrategyVector st;
        st.q = 0.6 * s.uniform();
        for (std::size_t u = 0; u < U; ++u) {
            st.rho.push_back(0.3 * s.uniform());
            st.bits.push_back(4 + static_cast<int>(s.index(13)));
            st.delta_aug.push_back(0.1);
        }
        auto w = uniform_weights(tau, st.q, S);
        auto rep = evaluate_bound(k, w, st, tau, std::vector<double>(U, st.q), S, 100);
        ++uniform_checks;
        if (rep.chi2_term != 0.0 || rep.dispersion_term != 0.0 || !rep.uniform_q)
            fail(o, fmt::format("case {}: uniform q gives chi2 term {:.3g}, dispersion {:.3g}", c, rep.chi2_term, rep.dispersion_term));

        // epsilon grid around the feasibility threshold
        const double psi = residual_psi(k, st, tau, S);
        const double eps0 = psi / bound_denominator(k);
        long long prev = std::numeric_limits<long long>::max();
        for (int i = 0; i < 40; ++i) {
            const double eps = eps0 * std::pow(10.0, -0.5 + 3.0 * i / 39.0);
            bool feasible = false;
            const long long want = omega_oracle(k, st, tau, S, eps, feasible);
            auto rr = rounds_to_epsilon(k, st, tau, S, eps);
            ++omega_checks;
            if (rr.feasible != feasible || (feasible && rr.Omega != want))
                fail(o, fmt::format("case {} eps {:.4g}: Omega {} vs oracle {}", c, eps, rr.Omega, want));
            if (rr.Omega > prev) fail(o, fmt::format("case {}: Omega increases with eps at {:.4g}", c, eps));
            prev = rr.Omega;
        }
    }
    if (o.pass)
        o.detail = fmt::format("{} uniform-q reports with zero chi2/dispersion; {} Omega values match the oracle", uniform_checks,
                               omega_checks);
    return o;
}

// ---- 8: optimizer ----

Outcome optimizer_sanity() {
    Outcome o;
    Block blk{{0.0}, {1.0}, false, "x"};
    double worst = 0.0;
    int max_calls = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto s = stream(seed, 0, 0, "acceptance-bo");
        int calls = 0;
        auto r = bo_minimize(
            blk, [&](const std::vector<double>& x) { ++calls; return (x[0] - 0.3) * (x[0] - 0.3); }, 30, s);
        max_calls = std::max(max_calls, calls);
        worst = std::max(worst, std::abs(r.x[0] - 0.3));
        if (calls > 30 || std::abs(r.x[0] - 0.3) > 0.05)
            fail(o, fmt::format("seed {}: x = {:.4f} after {} evaluations", seed, r.x[0], calls));
    }

    auto cfg = load_config(fs::path(FEDPQ_CONFIG_DIR) / "small.json");
    auto cell = prepare_cell(cfg, cfg.experiment.pi, 1);
    const auto& oc = cfg.optimizer;
    int runs = 0;
    for (double tol : {oc.eps_tol, 0.0, 0.5}) {
        for (int r_max : {1, 3, 6}) {
            BcdProblem P;
            P.bounds = cfg.bounds;
            P.q_lo = cell.objective->q_lo();
            P.q_hi = cell.objective->q_hi();
            auto obj = cell.objective;
            P.objective = [obj](const StrategyVector& x) { return (*obj)(x); };
            BoSettings st;
            st.candidates = oc.candidates;
            st.grid = oc.q_grid;
            auto init = initial_strategy(cfg, *cell.objective);
            init.q = std::clamp(init.q, P.q_lo, P.q_hi);
            auto s = stream(static_cast<std::uint64_t>(runs + 1), 0, 0, "acceptance-bcd");
            auto R = bcd_optimize(init, P, tol, r_max, {6, 6, 6, 6}, s, st);
            ++runs;
            const auto& h = R.history;
            if (static_cast<int>(h.size()) != R.iterations + 1) fail(o, "history length does not match iterations");
            for (std::size_t i = 1; i < h.size(); ++i)
                if (h[i] > h[i - 1]) fail(o, fmt::format("tol {} r_max {}: best rises {:.6g} -> {:.6g}", tol, r_max, h[i - 1], h[i]));
            double prev = h.front();
            for (const auto& row : R.trace) {
                if (row.best > prev) fail(o, "trace best-so-far rises");
                prev = row.best;
            }
            auto rel = [&](std::size_t i) { return h[i - 1] != 0 ? std::abs(h[i] - h[i - 1]) / std::abs(h[i - 1]) : std::abs(h[i] - h[i - 1]); };
            for (int i = 1; i < R.iterations; ++i)
                if (rel(static_cast<std::size_t>(i)) < tol) fail(o, fmt::format("tol {} r_max {}: continued after converging at {}", tol, r_max, i));
            const bool stopped_on_tol = R.iterations > 0 && rel(static_cast<std::size_t>(R.iterations)) < tol;
            if (R.iterations > r_max || (R.iterations < r_max && !stopped_on_tol))
                fail(o, fmt::format("tol {} r_max {}: stopped after {} iterations", tol, r_max, R.iterations));
            if (R.H != (*obj)(R.strategy)) fail(o, "reported H differs from the objective at the returned strategy");
        }
    }
    if (o.pass)
        o.detail = fmt::format("BO 10/10 seeds within {:.3g} using <= {} evaluations; {} BCD runs monotone and stopped per rule",
                               worst, max_calls, runs);
    return o;
}

// ---- 9: trend reproduction from emitted files ----

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome trend_reproduction() {
    Outcome o;
    const auto cfg_path = fs::path(FEDPQ_CONFIG_DIR) / "default.json";
    auto dir = fedpq::testing::scratch_dir("acceptance_sweep");
    auto r = fedpq::testing::run_command(std::string(FEDPQ_CLI_PATH) + " sweep --config " + cfg_path.string() + " --out " +
                                  dir.string() + " --workers 1");
    if (r.status != 0) {
        fail(o, "sweep failed: " + r.output.substr(0, 300));
        return o;
    }
    auto cfg = load_config(cfg_path);
    // (scenario, pi) -> rounds per seed; (pi, seed) -> scenario -> energy
    std::map<std::string, std::map<double, std::vector<double>>> rounds;
    std::map<std::pair<double, std::uint64_t>, std::map<std::string, double>> energy;
    for (double pi : cfg.experiment.sweep_pi)
        for (auto seed : cfg.experiment.seeds)
            for (const auto& sc : cfg.experiment.sweep_scenarios) {
                auto m = parse_metrics(dir / metrics_filename(sc, pi, seed));
                rounds[sc][pi].push_back(m.summary.rounds_to_target);
                energy[{pi, seed}][sc] = m.summary.total_energy;
            }
    std::string table;
    std::vector<std::string> a_fail;
    for (const auto& [sc, by_pi] : rounds) {
        std::vector<double> med;
        for (const auto& [pi, v] : by_pi) med.push_back(median(v));
        table += fmt::format(" {}={}", sc, fmt::join(med, "/"));
        for (std::size_t i = 1; i < med.size(); ++i)
            if (med[i] > med[i - 1]) {
                a_fail.push_back(sc);
                break;
            }
    }
    int wins = 0;
    for (const auto& [cell, e] : energy) wins += e.at("FedDPQ") <= e.at("TFL");
    const double lo_pi = cfg.experiment.sweep_pi.front();
    const double noda = median(rounds.at("FedDPQ-noDA").at(lo_pi)), ours = median(rounds.at("FedDPQ").at(lo_pi));
    const bool a_ok = a_fail.empty(), b_ok = wins >= 8, c_ok = noda > ours;
    if (!a_ok) fail(o, "");
    if (!b_ok || !c_ok) o.pass = false;
    o.detail = fmt::format("(a) {}{} (b) {} {}/{} cells (c) {} noDA {} vs FedDPQ {} | median rounds{}",
                           a_ok ? "ok" : "FAIL", a_ok ? "" : " [" + fmt::format("{}", fmt::join(a_fail, ",")) + "]",
                           b_ok ? "ok" : "FAIL", wins, energy.size(), c_ok ? "ok" : "FAIL", noda, ours, table);
    std::filesystem::remove_all(dir);
    return o;
}

// ---- 10: determinism ----

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    if (fs::is_regular_file(root)) {
        files["."] = fedpq::testing::slurp(root);
        return files;
    }
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = fedpq::testing::slurp(e.path());
    return files;
}

Outcome determinism() {
    Outcome o;
    const auto cfg = (fs::path(FEDPQ_CONFIG_DIR) / "small.json").string();
    auto dir = fedpq::testing::scratch_dir("acceptance_determinism");
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "simulate --seed 2"},
        {"optimize", "optimize --validate"},
        {"bound", "bound"},
        {"calibrate", "calibrate --seed 3"},
        {"sweep", "sweep --workers 2"},
    };
    int compared = 0;
    for (const auto& [name, args] : commands) {
        std::map<std::string, std::string> out[2];
        std::string stdout_text[2];
        for (int rep = 0; rep < 2; ++rep) {
            const auto target = dir / fmt::format("{}_{}", name, rep);
            auto r = fedpq::testing::run_command(std::string(FEDPQ_CLI_PATH) + " " + args + " --config " + cfg + " --out " + target.string());
            if (r.status != 0) {
                fail(o, fmt::format("{} exited with {}: {}", name, r.status, r.output.substr(0, 200)));
                break;
            }
            out[rep] = snapshot(target);
            stdout_text[rep] = r.output;
        }
        if (out[0].empty()) {
            fail(o, name + " wrote no files");
            continue;
        }
        if (out[0] != out[1]) fail(o, name + ": output files differ between runs");
        if (stdout_text[0] != stdout_text[1]) fail(o, name + ": console output differs between runs");
        compared += static_cast<int>(out[0].size());
    }
    if (o.pass) o.detail = fmt::format("5 subcommands run twice, {} output files byte-identical", compared);
    std::filesystem::remove_all(dir);
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "quantization unbiasedness", 30, quantization_unbiased},
        {2, "quantization error bound", 30, quantization_error_bound_holds},
        {3, "participation weights", 120, participation_weights_check},
        {4, "channel consistency", 10, channel_consistency},
        {5, "aggregation unbiasedness", 60, aggregation_unbiased},
        {6, "energy model", 10, energy_model},
        {7, "bound machinery", 5, bound_machinery},
        {8, "optimizer sanity", 60, optimizer_sanity},
        {9, "trend reproduction", 1200, trend_reproduction},
        {10, "determinism", 600, determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.limit_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::cout << fmt::format("[{}] criterion {:>2} {:<26} {:7.1f}s / {:.0f}s{}  {}", pass ? "PASS" : "FAIL", c.id, c.name,
                                 secs, c.limit_s, in_time ? "" : " (over time)", o.detail)
                  << std::endl;
    }
    return failures;
}
