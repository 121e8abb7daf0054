// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpq/channel.hpp"
#include "fedpq/compress.hpp"
#include "fedpq/config.hpp"
#include "fedpq/data.hpp"
#include "fedpq/energy.hpp"
#include "fedpq/model.hpp"
#include "fedpq/rng.hpp"

namespace fedpq {

class DivergenceError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything the training loop needs about the population: data, devices, model.
struct Federation {
    std::shared_ptr<const Model> model;
    std::vector<DeviceProfile> devices;
    std::vector<LocalDataset> local;
    std::vector<LocalDataset> mixed;
    std::vector<AugmentationPlan> plans;
    std::vector<double> tau;
    Dataset pooled;  // union of the mixed datasets
    Dataset test;
    Dataset pretrain;
    SurrogateGenerator generator;
    SystemConstants constants;
    std::uint64_t seed = 0;
    double pi = 0.0;

    std::size_t U() const { return devices.size(); }
    std::size_t V() const { return model->dim(); }
};

/// Assigns samples class by class, in order, to match explicit per-device counts.
inline std::vector<LocalDataset> partition_by_counts(const Dataset& global, const std::vector<DeviceProfile>& devs) {
    auto groups = global.by_class();
    std::vector<std::size_t> next(groups.size(), 0);
    std::vector<LocalDataset> out(devs.size(), Dataset(global.classes, global.features));
    for (std::size_t u = 0; u < devs.size(); ++u) {
        const auto& cc = devs[u].class_counts;
        if (cc.size() != groups.size())
            throw ValidationError("device " + std::to_string(u) + ": class_counts has " + std::to_string(cc.size()) +
                                  " entries, expected " + std::to_string(groups.size()));
        for (std::size_t c = 0; c < cc.size(); ++c)
            for (long i = 0; i < cc[c]; ++i) {
                if (next[c] >= groups[c].size())
                    throw ValidationError("class_counts request more class-" + std::to_string(c) +
                                          " samples than the training set holds");
                out[u].append(global, groups[c][next[c]++]);
            }
    }
    return out;
}

/// Regenerates mixed datasets, plans and tau for per-device augmentation factors.
inline void augment(Federation& fed, const std::vector<double>& delta_aug) {
    if (delta_aug.size() != fed.U()) throw std::invalid_argument("augment: delta_aug size differs from device count");
    fed.plans.clear();
    fed.mixed.clear();
    for (std::size_t u = 0; u < fed.U(); ++u) {
        fed.plans.push_back(plan_augmentation(fed.local[u].class_counts(), delta_aug[u]));
        auto s = stream(fed.seed, 0, static_cast<std::int64_t>(u), "generate");
        fed.mixed.push_back(execute_plan(fed.local[u], fed.plans[u], fed.generator, s));
    }
    fed.tau = tau_from_plans(fed.plans);
    fed.pooled = Dataset(fed.test.classes, fed.test.features);
    for (std::size_t u = 0; u < fed.U(); ++u) {
        fed.devices[u].tau = fed.tau[u];
        for (std::size_t i = 0; i < fed.mixed[u].size(); ++i) fed.pooled.append(fed.mixed[u], i);
    }
}

/// Builds the population for one (pi, seed) cell without augmentation.
///
/// The task data is fixed by the task seed; the partition varies with `seed`.
/// Devices listing class_counts for every device are filled in that order
/// instead of by Dirichlet partition.
inline Federation make_federation(const Config& cfg, double pi, std::uint64_t seed) {
    Federation fed;
    fed.seed = seed;
    fed.pi = pi;
    fed.constants = cfg.constants;
    fed.model = make_model(cfg.task);
    auto task = make_gaussian_task(cfg.task);
    fed.test = std::move(task.test);
    fed.pretrain = std::move(task.pretrain);
    fed.generator = fit_surrogate_generator(fed.pretrain, cfg.task.fidelity);
    fed.devices = cfg.devices;
    const bool explicit_counts = std::all_of(fed.devices.begin(), fed.devices.end(),
                                             [](const DeviceProfile& d) { return !d.class_counts.empty(); });
    if (explicit_counts) {
        fed.local = partition_by_counts(task.train, fed.devices);
    } else {
        auto s = stream(seed, 0, 0, "partition");
        fed.local = partition_dirichlet(task.train, fed.U(), pi, s);
    }
    for (std::size_t u = 0; u < fed.U(); ++u) {
        fed.devices[u].id = static_cast<int>(u);
        fed.devices[u].class_counts = fed.local[u].class_counts();
    }
    augment(fed, std::vector<double>(fed.U(), 0.0));
    return fed;
}

/// Per-device transmit state for a strategy: powers, achieved q and expected rates.
struct Deployment {
    StrategyVector strategy;
    std::vector<ChannelState> channel;
    int S = 10;
};

/// Solves powers for the strategy's common q unless explicit powers are given.
inline Deployment make_deployment(const Federation& fed, const StrategyVector& s, const Bounds& b, int S) {
    Deployment dep;
    dep.strategy = s;
    dep.S = S;
    if (s.p.empty())
        dep.channel = solve_fleet(fed.devices, s.q, fed.constants, b);
    else
        dep.channel = fleet_at_power(fed.devices, s.p, fed.constants);
    dep.strategy.p.clear();
    for (const auto& c : dep.channel) dep.strategy.p.push_back(c.p);
    return dep;
}

/// Minibatch indices: without replacement when b <= n, otherwise with replacement.
inline std::vector<std::size_t> sample_batch(std::size_t n, std::size_t b, Stream& s) {
    std::vector<std::size_t> idx;
    if (n == 0) return idx;
    if (b <= n) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        for (std::size_t i = 0; i < b; ++i) std::swap(all[i], all[i + s.index(n - i)]);
        idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(b));
    } else {
        for (std::size_t i = 0; i < b; ++i) idx.push_back(s.index(n));
    }
    return idx;
}

/// Minibatch gradient at the pruned model.
inline std::vector<double> local_gradient(const Model& m, const std::vector<double>& w, const LocalDataset& d, double rho,
                                          std::size_t b, Stream& s) {
    if (d.empty()) throw std::invalid_argument("local_gradient: device dataset is empty");
    const auto pruned = prune(w, rho).first;
    return batch_gradient(m, pruned, d, sample_batch(d.size(), b, s));
}

/// S i.i.d. categorical draws from tau.
inline std::vector<int> sample_participants(const std::vector<double>& tau, int S, Stream& s) {
    std::vector<int> out;
    for (int i = 0; i < S; ++i) out.push_back(static_cast<int>(s.categorical(tau)));
    return out;
}

struct RoundTrace {
    int round = 0;
    std::vector<int> participants;
    std::vector<int> alpha;          // 1 = received
    std::vector<double> slot_energy; // E_tr + E_cu per slot
    double energy_tr = 0.0, energy_cu = 0.0;
    double loss = 0.0, accuracy = 0.0;
    bool skipped = false;
};

/// One aggregation round; `w` is updated in place.
inline RoundTrace federated_round(const Federation& fed, const Deployment& dep, std::vector<double>& w, int t) {
    const auto& k = fed.constants;
    const auto& st = dep.strategy;
    const std::size_t V = fed.V();
    RoundTrace tr;
    tr.round = t;
    auto ps = stream(fed.seed, t, 0, "participants");
    tr.participants = sample_participants(fed.tau, dep.S, ps);
    struct Slot {
        int device, slot;
        std::vector<double> g;
    };
    std::vector<Slot> ok;
    for (int i = 0; i < dep.S; ++i) {
        const auto u = static_cast<std::size_t>(tr.participants[static_cast<std::size_t>(i)]);
        auto bs = stream(fed.seed, t, i, "batch");
        auto g = local_gradient(*fed.model, w, fed.mixed[u], st.rho[u], static_cast<std::size_t>(k.b), bs);
        auto qs = stream(fed.seed, t, i, "quantize");
        auto qg = quantize(g, st.bits[u], qs, k.o_bits);
        auto os = stream(fed.seed, t, i, "outage");
        const int a = sample_outage(dep.channel[u].q, os);
        tr.alpha.push_back(a);
        auto e = round_energy(fed.devices[u], st.rho[u], st.bits[u], dep.channel[u].p, dep.channel[u].rate, k, V);
        tr.energy_tr += e.E_tr;
        tr.energy_cu += e.E_cu;
        tr.slot_energy.push_back(e.round_energy());
        if (a) ok.push_back({static_cast<int>(u), i, dequantize(qg)});
    }
    if (ok.empty()) {
        tr.skipped = true;
        return tr;
    }
    std::sort(ok.begin(), ok.end(), [](const Slot& a, const Slot& b) {
        return a.device != b.device ? a.device < b.device : a.slot < b.slot;
    });
    const double inv = 1.0 / static_cast<double>(ok.size());
    for (std::size_t v = 0; v < V; ++v) {
        CompensatedSum acc;
        for (const auto& sl : ok) acc.add(sl.g[v]);
        w[v] -= k.eta * acc.value() * inv;
        if (!std::isfinite(w[v])) throw DivergenceError("round " + std::to_string(t) + ": non-finite parameters");
    }
    return tr;
}

struct RunSettings {
    int round_cap = 2000;
    double target_accuracy = 0.8;
    int accuracy_window = 1;
    bool stop_at_target = true;
};

struct RunSummary {
    int rounds_to_target = 0;  // round cap when the target is not reached
    double total_energy = 0.0;
    bool reached_target = false;
    double energy_gen_total = 0.0;
    double initial_loss = 0.0, initial_accuracy = 0.0;
    int rounds_run = 0;
    int skipped_rounds = 0;
    int effective_rounds = 0;  // rounds with at least one received update
};

struct RunResult {
    std::vector<RoundTrace> rounds;
    RunSummary summary;
    std::vector<double> w;
};

inline double generation_energy_total(const Federation& fed) {
    CompensatedSum e;
    for (std::size_t u = 0; u < fed.U(); ++u) e.add(generation_energy(fed.devices[u], fed.plans[u], fed.constants).first);
    return e.value();
}

/// Trains from the model's initial point until the trailing-window test accuracy
/// reaches the target or the round cap is hit.
inline RunResult run_experiment(const Federation& fed, const Deployment& dep, const RunSettings& rs) {
    RunResult r;
    auto w = fed.model->initial();
    auto& sm = r.summary;
    sm.energy_gen_total = generation_energy_total(fed);
    sm.initial_loss = mean_loss(*fed.model, w, fed.pooled);
    sm.initial_accuracy = accuracy(*fed.model, w, fed.test);
    CompensatedSum energy;
    energy.add(sm.energy_gen_total);
    std::vector<double> window;
    sm.rounds_to_target = rs.round_cap;
    for (int t = 1; t <= rs.round_cap; ++t) {
        auto tr = federated_round(fed, dep, w, t);
        tr.loss = mean_loss(*fed.model, w, fed.pooled);
        tr.accuracy = accuracy(*fed.model, w, fed.test);
        energy.add(tr.energy_tr);
        energy.add(tr.energy_cu);
        sm.skipped_rounds += tr.skipped ? 1 : 0;
        window.push_back(tr.accuracy);
        if (static_cast<int>(window.size()) > rs.accuracy_window) window.erase(window.begin());
        r.rounds.push_back(std::move(tr));
        sm.rounds_run = t;
        const double mean = std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
        if (!sm.reached_target && static_cast<int>(window.size()) == rs.accuracy_window && mean >= rs.target_accuracy) {
            sm.reached_target = true;
            sm.rounds_to_target = t;
            if (rs.stop_at_target) break;
        }
    }
    sm.effective_rounds = sm.rounds_run - sm.skipped_rounds;
    sm.total_energy = energy.value();
    r.w = std::move(w);
    return r;
}

struct ProbeReport {
    std::vector<double> deviation;  // mean partial aggregate minus full aggregate
    std::vector<double> se;
    double max_abs_deviation = 0.0;
    double max_z = 0.0;  // max |deviation| / se over components with se > 0
    long trials = 0;
};

/// Monte Carlo check that S-sample aggregation with replacement is unbiased for
/// the tau-weighted full aggregate, with one local step per device from w.
///
/// Local models are represented as offsets from w so identical datasets
/// produce identical contributions exactly.
inline ProbeReport unbiasedness_probe(const Federation& fed, const std::vector<double>& w, int S, long trials,
                                      std::uint64_t seed) {
    const std::size_t U = fed.U(), V = fed.V();
    const double eta = fed.constants.eta;
    std::vector<std::vector<double>> delta(U);
    for (std::size_t u = 0; u < U; ++u) {
        delta[u] = full_gradient(*fed.model, w, fed.mixed[u]);
        for (auto& x : delta[u]) x *= -eta;
    }
    std::vector<double> full(V, 0.0);
    for (std::size_t v = 0; v < V; ++v) {
        CompensatedSum s;
        for (std::size_t u = 0; u < U; ++u) s.add(fed.tau[u] * delta[u][v]);
        full[v] = s.value();
    }
    std::vector<double> m1(V, 0.0), m2(V, 0.0);
    std::vector<double> agg(V);
    auto st = stream(seed, 0, 0, "probe");
    for (long t = 0; t < trials; ++t) {
        auto parts = sample_participants(fed.tau, S, st);
        std::sort(parts.begin(), parts.end());
        for (std::size_t v = 0; v < V; ++v) {
            CompensatedSum s;
            for (int u : parts) s.add(delta[static_cast<std::size_t>(u)][v]);
            const double x = s.value() / static_cast<double>(S) - full[v];
            m1[v] += x;
            m2[v] += x * x;
        }
    }
    ProbeReport rep;
    rep.trials = trials;
    const double n = static_cast<double>(trials);
    for (std::size_t v = 0; v < V; ++v) {
        const double mean = m1[v] / n;
        const double se = trials > 1 ? std::sqrt(std::max(m2[v] / n - mean * mean, 0.0) / (n - 1.0)) : 0.0;
        rep.deviation.push_back(mean);
        rep.se.push_back(se);
        rep.max_abs_deviation = std::max(rep.max_abs_deviation, std::abs(mean));
        if (se > 0) rep.max_z = std::max(rep.max_z, std::abs(mean) / se);
    }
    return rep;
}

inline double squared_norm(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

/// Exact variance of a size-b minibatch mean gradient at w, summed over coordinates.
inline double minibatch_variance(const Model& m, const std::vector<double>& w, const Dataset& d, std::size_t b) {
    const std::size_t n = d.size();
    if (n < 2 || b == 0) return 0.0;
    const auto mean = full_gradient(m, w, d);
    std::vector<double> g(m.dim());
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(g.begin(), g.end(), 0.0);
        m.accumulate(w, d, i, 1.0, g.data());
        ss += squared_distance(g, mean);
    }
    const double pop = ss / static_cast<double>(n);
    if (b > n) return pop / static_cast<double>(b);
    return pop / static_cast<double>(b) * static_cast<double>(n - b) / static_cast<double>(n - 1);
}

struct CalibrationReport {
    double L = 0.0, sigma2 = 0.0, Gamma2 = 0.0;
    std::vector<double> Z2, grad_range2;
    double loss_gap = 0.0;
    int probes = 0;
};

/// Running-maximum estimates of the smoothness, variance, heterogeneity and
/// range constants over explicit probe points. All values are lower bounds on
/// the true suprema.
inline CalibrationReport calibrate_at(const Federation& fed, const std::vector<std::vector<double>>& points) {
    std::vector<std::vector<double>> distinct;
    for (const auto& p : points)
        if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) distinct.push_back(p);
    if (distinct.size() < 2) throw std::invalid_argument("calibrate: fewer than 2 distinct parameter points probed");
    const std::size_t U = fed.U(), V = fed.V();
    const auto& m = *fed.model;
    const auto b = static_cast<std::size_t>(fed.constants.b);
    CalibrationReport rep;
    rep.Z2.assign(U, 0.0);
    rep.grad_range2.assign(U, 0.0);
    rep.probes = static_cast<int>(points.size());
    std::vector<std::vector<std::vector<double>>> grads;  // [probe][device]
    for (std::size_t t = 0; t < points.size(); ++t) {
        const auto& w = points[t];
        rep.Gamma2 = std::max(rep.Gamma2, squared_norm(w));
        std::vector<std::vector<double>> gu(U);
        std::vector<double> global(V, 0.0);
        for (std::size_t u = 0; u < U; ++u) {
            if (fed.mixed[u].empty()) {
                gu[u].assign(V, 0.0);
                continue;
            }
            gu[u] = full_gradient(m, w, fed.mixed[u]);
            for (std::size_t v = 0; v < V; ++v) global[v] += fed.tau[u] * gu[u][v];
            rep.sigma2 = std::max(rep.sigma2, minibatch_variance(m, w, fed.mixed[u], b));
            auto s = stream(fed.seed, static_cast<std::int64_t>(t), static_cast<std::int64_t>(u), "calibrate-batch");
            auto g = batch_gradient(m, w, fed.mixed[u], sample_batch(fed.mixed[u].size(), b, s));
            auto [lo, hi] = std::minmax_element(g.begin(), g.end());
            rep.grad_range2[u] = std::max(rep.grad_range2[u], static_cast<double>(V) * (*hi - *lo) * (*hi - *lo));
        }
        for (std::size_t u = 0; u < U; ++u)
            if (!fed.mixed[u].empty()) rep.Z2[u] = std::max(rep.Z2[u], squared_distance(gu[u], global));
        grads.push_back(std::move(gu));
    }
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double dw = std::sqrt(squared_distance(points[i], points[j]));
            if (dw == 0) continue;
            for (std::size_t u = 0; u < U; ++u)
                rep.L = std::max(rep.L, std::sqrt(squared_distance(grads[i][u], grads[j][u])) / dw);
        }
    return rep;
}

/// Full-gradient descent trajectory on the global objective, used as probe points.
inline std::vector<std::vector<double>> probe_trajectory(const Federation& fed, int rounds, double step) {
    if (rounds < 2) throw std::invalid_argument("calibrate: probe rounds must be >= 2");
    std::vector<std::vector<double>> pts;
    auto w = fed.model->initial();
    pts.push_back(w);
    for (int r = 1; r < rounds; ++r) {
        auto g = full_gradient(*fed.model, w, fed.pooled);
        for (std::size_t v = 0; v < w.size(); ++v) w[v] -= step * g[v];
        pts.push_back(w);
    }
    return pts;
}

/// Initial loss minus the best loss of a long centralized gradient-descent run on the pooled data.
inline double centralized_loss_gap(const Federation& fed, double step, int iterations) {
    static std::mutex mu;
    static std::map<std::tuple<std::uint64_t, double, std::size_t, std::size_t>, double> cache;
    const auto key = std::make_tuple(fed.seed, fed.pi, fed.pooled.size(), fed.V());
    {
        std::lock_guard<std::mutex> lock(mu);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto w = fed.model->initial();
    const double f0 = mean_loss(*fed.model, w, fed.pooled);
    double best = f0;
    for (int i = 0; i < iterations; ++i) {
        auto g = full_gradient(*fed.model, w, fed.pooled);
        for (std::size_t v = 0; v < w.size(); ++v) w[v] -= step * g[v];
        best = std::min(best, mean_loss(*fed.model, w, fed.pooled));
    }
    const double gap = f0 - best;
    std::lock_guard<std::mutex> lock(mu);
    cache[key] = gap;
    return gap;
}

/// Gradient-norm target matching an accuracy target: the running mean of
/// ||grad F(w^{t-1})||^2 along centralized gradient descent with step eta, up to
/// the first iterate whose test accuracy reaches `target_accuracy` (or `max_steps`).
inline double epsilon_from_accuracy(const Federation& fed, double target_accuracy, int max_steps) {
    auto w = fed.model->initial();
    CompensatedSum norms;
    int n = 0;
    for (int t = 1; t <= max_steps; ++t) {
        auto g = full_gradient(*fed.model, w, fed.pooled);
        norms.add(squared_norm(g));
        ++n;
        for (std::size_t v = 0; v < w.size(); ++v) w[v] -= fed.constants.eta * g[v];
        if (accuracy(*fed.model, w, fed.test) >= target_accuracy) break;
    }
    return n > 0 ? norms.value() / n : 0.0;
}

/// Calibrates along a probe trajectory with step eta and writes the estimates into a copy of the constants.
inline SystemConstants calibrate_constants(const Federation& fed, int probe_rounds, CalibrationReport* out = nullptr) {
    auto rep = calibrate_at(fed, probe_trajectory(fed, probe_rounds, fed.constants.eta));
    const double gd_step = rep.L > 0 ? 1.0 / rep.L : fed.constants.eta;
    rep.loss_gap = centralized_loss_gap(fed, gd_step, 500);
    SystemConstants k = fed.constants;
    k.L = rep.L;
    k.sigma2 = rep.sigma2;
    k.Z2 = rep.Z2;
    k.Gamma2 = rep.Gamma2;
    k.grad_range2 = rep.grad_range2;
    k.loss_gap = rep.loss_gap;
    if (out) *out = rep;
    return k;
}

/// Per-class mean gradients of real and synthetic data at probe points.
///
/// A device's full gradient on a mixed dataset is approximated by the
/// count-weighted mixture of these class gradients, which makes the
/// heterogeneity term a cheap function of the augmentation factors.
struct ClassGradientTable {
    std::vector<std::vector<std::vector<double>>> real, synthetic;  // [probe][class][V]
};

inline ClassGradientTable class_gradient_table(const Federation& fed, const std::vector<std::vector<double>>& points,
                                               int synthetic_per_class = 256) {
    ClassGradientTable tab;
    const int C = fed.test.classes;
    Dataset real(C, fed.test.features);
    for (const auto& d : fed.local)
        for (std::size_t i = 0; i < d.size(); ++i) real.append(d, i);
    auto groups = real.by_class();
    Dataset synth(C, fed.test.features);
    std::vector<double> x(static_cast<std::size_t>(fed.test.features));
    for (int c = 0; c < C; ++c) {
        auto s = stream(fed.seed, 0, c, "table-synthetic");
        for (int i = 0; i < synthetic_per_class; ++i) {
            fed.generator.sample(c, s, x.data());
            synth.push(x.data(), c, true);
        }
    }
    auto sgroups = synth.by_class();
    for (const auto& w : points) {
        std::vector<std::vector<double>> r, g;
        for (int c = 0; c < C; ++c) {
            r.push_back(batch_gradient(*fed.model, w, real, groups[static_cast<std::size_t>(c)]));
            g.push_back(batch_gradient(*fed.model, w, synth, sgroups[static_cast<std::size_t>(c)]));
        }
        tab.real.push_back(std::move(r));
        tab.synthetic.push_back(std::move(g));
    }
    return tab;
}

/// Heterogeneity bounds max_t ||grad F_u - grad F||^2 predicted from class tables for given plans.
inline std::vector<double> predicted_z2(const ClassGradientTable& tab, const std::vector<AugmentationPlan>& plans,
                                        const std::vector<double>& tau) {
    const std::size_t U = plans.size();
    std::vector<double> z2(U, 0.0);
    if (tab.real.empty()) return z2;
    const std::size_t V = tab.real[0][0].size();
    std::vector<std::vector<double>> gu(U, std::vector<double>(V));
    std::vector<double> global(V);
    for (std::size_t t = 0; t < tab.real.size(); ++t) {
        std::fill(global.begin(), global.end(), 0.0);
        for (std::size_t u = 0; u < U; ++u) {
            std::fill(gu[u].begin(), gu[u].end(), 0.0);
            double n = 0.0;
            for (long m : plans[u].mix) n += static_cast<double>(m);
            if (n == 0) continue;
            for (std::size_t c = 0; c < plans[u].mix.size(); ++c) {
                const double wl = static_cast<double>(plans[u].local[c]) / n;
                const double wg = static_cast<double>(plans[u].gen[c]) / n;
                const auto& r = tab.real[t][c];
                const auto& g = tab.synthetic[t][c];
                for (std::size_t v = 0; v < V; ++v) gu[u][v] += wl * r[v] + wg * g[v];
            }
            for (std::size_t v = 0; v < V; ++v) global[v] += tau[u] * gu[u][v];
        }
        for (std::size_t u = 0; u < U; ++u) z2[u] = std::max(z2[u], squared_distance(gu[u], global));
    }
    return z2;
}

}  // namespace fedpq
