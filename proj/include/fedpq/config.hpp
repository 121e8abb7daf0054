// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpq/rng.hpp"

namespace fedpq {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class ParseError : public ConfigError {
    using ConfigError::ConfigError;
};
class ValidationError : public ConfigError {
    using ConfigError::ConfigError;
};

struct DeviceProfile {
    int id = 0;
    double f = 3e7;      // CPU frequency, cycles/s
    double d = 100.0;    // distance to the base station, m
    double I = 1e-8;     // interference power, W
    double B_ul = 1e6;   // uplink bandwidth, Hz
    std::vector<long> class_counts;
    double tau = 0.0;
};

struct Bounds {
    double p_min = 0.01, p_max = 0.1;
    double delta_aug_min = 0.1, delta_aug_max = 0.4;
    double rho_min = 0.1, rho_max = 0.3;
    int bits_min = 6, bits_max = 16;
};

struct StrategyVector {
    double q = 0.05;
    std::vector<double> delta_aug;
    std::vector<double> rho;
    std::vector<int> bits;
    std::vector<double> p;

    std::size_t size() const { return rho.size(); }
};

struct SystemConstants {
    double L = 1.0;
    double sigma2 = 0.0;
    std::vector<double> Z2;
    double Gamma2 = 1.0;
    double eta = 0.001;
    std::vector<double> grad_range2;
    double upsilon = 1.0;
    int o_bits = 64;
    int b = 32;
    double c_tr = 2.7e8;
    double c_gen = 2.2e8;
    double varrho = 1.25e-26;
    double gamma_exp = 3.0;
    double N0_dbm_hz = -174.0;
    double loss_gap = 1.0;  // E[F(w0)] - E[F(w*)]

    /// Noise power spectral density in W/Hz.
    double noise_psd() const { return std::pow(10.0, (N0_dbm_hz - 30.0) / 10.0); }
};

struct TaskSettings {
    int classes = 10;
    int features = 32;
    int train = 5000;
    int test = 1000;
    int pretrain = 1000;
    double separation = 1.0;
    double noise = 0.35;
    std::uint64_t seed = 1234;
    double fidelity = 1.0;  // surrogate generator lambda
    std::string model = "logistic";
    int hidden = 16;
};

struct ExperimentSettings {
    int S = 10;
    double pi = 0.6;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int round_cap = 2000;
    double target_accuracy = 0.8;
    int accuracy_window = 1;
    std::string scenario = "FedDPQ";
    double epsilon = 1.0;
    bool epsilon_auto = false;  // derive epsilon from target_accuracy
    int calibration_rounds = 20;
    std::vector<double> sweep_pi{0.6, 1.2, 1.5};
    std::vector<std::string> sweep_scenarios{"TFL", "FedDPQ", "FedDPQ-noDA", "FedDPQ-noPQ", "FedDPQ-noPC"};
};

struct OptimizerSettings {
    double eps_tol = 1e-3;
    int r_max = 5;
    int budget_q = 20;
    int budget_delta = 40;
    int budget_rho = 40;
    int budget_bits = 40;
    double length_scale = 0.2;
    double jitter = 1e-8;
    int candidates = 1024;
    int q_grid = 512;
    int init_points = 2;
};

struct Config {
    std::vector<DeviceProfile> devices;
    SystemConstants constants;
    bool calibrate = true;
    Bounds bounds;
    bool has_strategy = false;
    StrategyVector strategy;
    TaskSettings task;
    ExperimentSettings experiment;
    OptimizerSettings optimizer;
};

namespace detail {

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::vector<double> scalar_or_vector(const json& j, std::size_t n, const char* what) {
    if (j.is_number()) return std::vector<double>(n, j.get<double>());
    if (j.is_array()) {
        auto v = j.get<std::vector<double>>();
        if (v.size() != n)
            throw ValidationError(std::string(what) + ": expected " + std::to_string(n) + " entries, got " +
                                  std::to_string(v.size()));
        return v;
    }
    throw ValidationError(std::string(what) + ": expected a number or an array");
}

inline std::string fmt_range(double lo, double hi) {
    std::ostringstream os;
    os << "[" << lo << ", " << hi << "]";
    return os.str();
}

}  // namespace detail

inline void validate_device(const DeviceProfile& d) {
    auto name = "device " + std::to_string(d.id);
    if (!(d.f > 0)) throw ValidationError(name + ": f_u must be > 0");
    if (!(d.d > 0)) throw ValidationError(name + ": d_u must be > 0");
    if (!(d.B_ul > 0)) throw ValidationError(name + ": B_ul must be > 0");
    if (!(d.I >= 0)) throw ValidationError(name + ": I_u must be >= 0");
    for (long c : d.class_counts)
        if (c < 0) throw ValidationError(name + ": class_counts entries must be >= 0");
}

inline void validate_bounds(const Bounds& b) {
    if (!(0 < b.p_min && b.p_min <= b.p_max)) throw ValidationError("bounds: need 0 < p_min <= p_max");
    if (!(0 <= b.delta_aug_min && b.delta_aug_min <= b.delta_aug_max))
        throw ValidationError("bounds: need 0 <= delta_aug_min <= delta_aug_max");
    if (!(0 <= b.rho_min && b.rho_min <= b.rho_max && b.rho_max < 1))
        throw ValidationError("bounds: need 0 <= rho_min <= rho_max < 1");
    if (!(1 <= b.bits_min && b.bits_min <= b.bits_max && b.bits_max <= 31))
        throw ValidationError("bounds: need 1 <= bits_min <= bits_max <= 31");
}

inline void validate_constants(const SystemConstants& k) {
    if (!(k.L > 0)) throw ValidationError("constants: L must be > 0");
    if (!(k.eta > 0)) throw ValidationError("constants: eta must be > 0");
    if (!(k.c_tr > 0 && k.c_gen > 0 && k.varrho > 0 && k.gamma_exp > 0))
        throw ValidationError("constants: energy constants must be > 0");
    if (!(k.upsilon > 0)) throw ValidationError("constants: upsilon must be > 0");
    if (k.o_bits < 0) throw ValidationError("constants: o_bits must be >= 0");
    if (k.b < 1) throw ValidationError("constants: batch size b must be >= 1");
    if (!(k.sigma2 >= 0 && k.Gamma2 >= 0 && k.loss_gap >= 0))
        throw ValidationError("constants: sigma2, Gamma2 and loss_gap must be >= 0");
    for (double z : k.Z2)
        if (!(z >= 0)) throw ValidationError("constants: Z2 entries must be >= 0");
    for (double g : k.grad_range2)
        if (!(g >= 0)) throw ValidationError("constants: grad_range2 entries must be >= 0");
}

/// Checks every box constraint on a strategy. Power is checked only when set.
inline void validate_strategy(const StrategyVector& s, const Bounds& b, std::size_t U) {
    auto check_size = [&](std::size_t n, const char* what) {
        if (n != U)
            throw ValidationError(std::string("strategy: ") + what + " has " + std::to_string(n) +
                                  " entries, expected " + std::to_string(U));
    };
    check_size(s.delta_aug.size(), "delta_aug");
    check_size(s.rho.size(), "rho");
    check_size(s.bits.size(), "bits");
    if (!(s.q >= 0 && s.q <= 1)) throw ValidationError("strategy: q outside [0, 1]");
    for (std::size_t u = 0; u < U; ++u) {
        auto at = "[" + std::to_string(u) + "]";
        if (!(s.delta_aug[u] >= b.delta_aug_min && s.delta_aug[u] <= b.delta_aug_max))
            throw ValidationError("strategy: delta_aug" + at + " outside delta bound " +
                                  detail::fmt_range(b.delta_aug_min, b.delta_aug_max));
        if (!(s.rho[u] >= b.rho_min && s.rho[u] <= b.rho_max))
            throw ValidationError("strategy: rho" + at + " outside rho bound " + detail::fmt_range(b.rho_min, b.rho_max));
        if (s.bits[u] < b.bits_min || s.bits[u] > b.bits_max)
            throw ValidationError("strategy: bits" + at + " outside bits bound " +
                                  detail::fmt_range(b.bits_min, b.bits_max));
    }
    if (!s.p.empty()) {
        check_size(s.p.size(), "p");
        for (std::size_t u = 0; u < U; ++u)
            if (!(s.p[u] >= b.p_min && s.p[u] <= b.p_max))
                throw ValidationError("strategy: p[" + std::to_string(u) + "] outside power bound " +
                                      detail::fmt_range(b.p_min, b.p_max));
    }
}

/// Draws U device profiles from uniform ranges.
inline std::vector<DeviceProfile> random_devices(std::size_t U, std::uint64_t seed, double f_lo = 2e7, double f_hi = 5e7,
                                                 double d_lo = 100, double d_hi = 300, double I_lo = 1e-8,
                                                 double I_hi = 2e-8, double B_ul = 1e6) {
    std::vector<DeviceProfile> out(U);
    for (std::size_t u = 0; u < U; ++u) {
        auto s = stream(seed, 0, static_cast<std::int64_t>(u), "device");
        out[u].id = static_cast<int>(u);
        out[u].f = s.uniform(f_lo, f_hi);
        out[u].d = s.uniform(d_lo, d_hi);
        out[u].I = s.uniform(I_lo, I_hi);
        out[u].B_ul = B_ul;
        out[u].tau = 1.0 / static_cast<double>(U);
    }
    return out;
}

inline StrategyVector strategy_from_json(const json& j, std::size_t U) {
    StrategyVector s;
    detail::get_if(j, "q", s.q);
    s.delta_aug = detail::scalar_or_vector(j.value("delta_aug", json(0.1)), U, "strategy.delta_aug");
    s.rho = detail::scalar_or_vector(j.value("rho", json(0.1)), U, "strategy.rho");
    auto bits = detail::scalar_or_vector(j.value("bits", json(8)), U, "strategy.bits");
    for (std::size_t u = 0; u < U; ++u) {
        if (bits[u] != std::floor(bits[u]) || bits[u] < 1)
            throw ValidationError("strategy: bits[" + std::to_string(u) + "] must be a positive integer");
        s.bits.push_back(static_cast<int>(bits[u]));
    }
    if (j.contains("p")) s.p = detail::scalar_or_vector(j.at("p"), U, "strategy.p");
    return s;
}

inline json strategy_to_json(const StrategyVector& s) {
    return json{{"q", s.q}, {"delta_aug", s.delta_aug}, {"rho", s.rho}, {"bits", s.bits}, {"p", s.p}};
}

/// Builds and validates a configuration from a parsed document.
inline Config parse_config(const json& j) {
    Config c;
    try {
        if (j.contains("bounds")) {
            const auto& b = j.at("bounds");
            detail::get_if(b, "p_min", c.bounds.p_min);
            detail::get_if(b, "p_max", c.bounds.p_max);
            if (b.contains("delta_aug")) {
                c.bounds.delta_aug_min = b.at("delta_aug").at(0).get<double>();
                c.bounds.delta_aug_max = b.at("delta_aug").at(1).get<double>();
            }
            if (b.contains("rho")) {
                c.bounds.rho_min = b.at("rho").at(0).get<double>();
                c.bounds.rho_max = b.at("rho").at(1).get<double>();
            }
            if (b.contains("bits")) {
                c.bounds.bits_min = b.at("bits").at(0).get<int>();
                c.bounds.bits_max = b.at("bits").at(1).get<int>();
            }
        }
        validate_bounds(c.bounds);

        const json devs = j.value("devices", json::object({{"count", 10}}));
        if (devs.is_array()) {
            int id = 0;
            for (const auto& dj : devs) {
                DeviceProfile d;
                d.id = id++;
                detail::get_if(dj, "f_hz", d.f);
                detail::get_if(dj, "d_m", d.d);
                detail::get_if(dj, "I_w", d.I);
                detail::get_if(dj, "B_ul_hz", d.B_ul);
                detail::get_if(dj, "class_counts", d.class_counts);
                c.devices.push_back(d);
            }
        } else {
            auto range = [&](const char* key, double lo, double hi) {
                if (!devs.contains(key)) return std::pair{lo, hi};
                return std::pair{devs.at(key).at(0).get<double>(), devs.at(key).at(1).get<double>()};
            };
            auto [flo, fhi] = range("f_hz", 2e7, 5e7);
            auto [dlo, dhi] = range("d_m", 100, 300);
            auto [ilo, ihi] = range("I_w", 1e-8, 2e-8);
            c.devices = random_devices(devs.value("count", 10), devs.value("seed", std::uint64_t{7}), flo, fhi, dlo, dhi,
                                       ilo, ihi, devs.value("B_ul_hz", 1e6));
        }
        if (c.devices.empty()) throw ValidationError("devices: at least one device is required");
        for (auto& d : c.devices) {
            d.tau = 1.0 / static_cast<double>(c.devices.size());
            validate_device(d);
        }
        const std::size_t U = c.devices.size();

        if (j.contains("constants")) {
            const auto& k = j.at("constants");
            auto& K = c.constants;
            c.calibrate = k.value("calibrate", !k.contains("L"));
            detail::get_if(k, "L", K.L);
            detail::get_if(k, "sigma2", K.sigma2);
            detail::get_if(k, "Gamma2", K.Gamma2);
            detail::get_if(k, "eta", K.eta);
            detail::get_if(k, "upsilon", K.upsilon);
            detail::get_if(k, "o_bits", K.o_bits);
            detail::get_if(k, "batch", K.b);
            detail::get_if(k, "c_tr", K.c_tr);
            detail::get_if(k, "c_gen", K.c_gen);
            detail::get_if(k, "varrho", K.varrho);
            detail::get_if(k, "gamma", K.gamma_exp);
            detail::get_if(k, "N0_dbm_hz", K.N0_dbm_hz);
            detail::get_if(k, "loss_gap", K.loss_gap);
            K.Z2 = detail::scalar_or_vector(k.value("Z2", json(0.0)), U, "constants.Z2");
            K.grad_range2 = detail::scalar_or_vector(k.value("grad_range2", json(0.0)), U, "constants.grad_range2");
        } else {
            c.constants.Z2.assign(U, 0.0);
            c.constants.grad_range2.assign(U, 0.0);
        }
        validate_constants(c.constants);

        if (j.contains("strategy")) {
            c.has_strategy = true;
            c.strategy = strategy_from_json(j.at("strategy"), U);
            validate_strategy(c.strategy, c.bounds, U);
        } else {
            c.strategy.q = 0.05;
            c.strategy.delta_aug.assign(U, c.bounds.delta_aug_min);
            c.strategy.rho.assign(U, c.bounds.rho_min);
            c.strategy.bits.assign(U, c.bounds.bits_max);
        }

        if (j.contains("task")) {
            const auto& t = j.at("task");
            auto& T = c.task;
            detail::get_if(t, "classes", T.classes);
            detail::get_if(t, "features", T.features);
            detail::get_if(t, "train", T.train);
            detail::get_if(t, "test", T.test);
            detail::get_if(t, "pretrain", T.pretrain);
            detail::get_if(t, "separation", T.separation);
            detail::get_if(t, "noise", T.noise);
            detail::get_if(t, "seed", T.seed);
            detail::get_if(t, "fidelity", T.fidelity);
            detail::get_if(t, "model", T.model);
            detail::get_if(t, "hidden", T.hidden);
            if (T.classes < 2 || T.features < 1 || T.train < 1 || T.test < 1 || T.pretrain < 1)
                throw ValidationError("task: classes >= 2 and positive sample counts required");
            if (!(T.fidelity >= 0 && T.fidelity <= 1)) throw ValidationError("task: fidelity outside [0, 1]");
            if (T.model != "logistic" && T.model != "mlp")
                throw ValidationError("task: model must be 'logistic' or 'mlp'");
        }
        for (const auto& d : c.devices)
            if (!d.class_counts.empty() && d.class_counts.size() != static_cast<std::size_t>(c.task.classes))
                throw ValidationError("device " + std::to_string(d.id) + ": class_counts length differs from classes");

        if (j.contains("experiment")) {
            const auto& e = j.at("experiment");
            auto& E = c.experiment;
            detail::get_if(e, "S", E.S);
            detail::get_if(e, "pi", E.pi);
            detail::get_if(e, "seeds", E.seeds);
            detail::get_if(e, "round_cap", E.round_cap);
            detail::get_if(e, "target_accuracy", E.target_accuracy);
            detail::get_if(e, "accuracy_window", E.accuracy_window);
            detail::get_if(e, "scenario", E.scenario);
            if (e.contains("epsilon")) {
                const auto& ej = e.at("epsilon");
                if (ej.is_string()) {
                    if (ej.get<std::string>() != "auto") throw ValidationError("experiment: epsilon must be a number or \"auto\"");
                    E.epsilon_auto = true;
                } else {
                    E.epsilon = ej.get<double>();
                }
            }
            detail::get_if(e, "calibration_rounds", E.calibration_rounds);
            detail::get_if(e, "sweep_pi", E.sweep_pi);
            detail::get_if(e, "sweep_scenarios", E.sweep_scenarios);
            if (E.S < 0 || E.round_cap < 0 || E.accuracy_window < 1 || !(E.pi > 0) || !(E.epsilon > 0))
                throw ValidationError("experiment: need S >= 0, round_cap >= 0, accuracy_window >= 1, pi > 0, epsilon > 0");
            if (E.calibration_rounds < 2) throw ValidationError("experiment: calibration_rounds must be >= 2");
        }

        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            auto& O = c.optimizer;
            detail::get_if(o, "eps_tol", O.eps_tol);
            detail::get_if(o, "r_max", O.r_max);
            detail::get_if(o, "budget_q", O.budget_q);
            detail::get_if(o, "budget_delta", O.budget_delta);
            detail::get_if(o, "budget_rho", O.budget_rho);
            detail::get_if(o, "budget_bits", O.budget_bits);
            detail::get_if(o, "length_scale", O.length_scale);
            detail::get_if(o, "jitter", O.jitter);
            detail::get_if(o, "candidates", O.candidates);
            detail::get_if(o, "q_grid", O.q_grid);
            detail::get_if(o, "init_points", O.init_points);
            if (!(O.length_scale > 0 && O.jitter >= 0) || O.candidates < 1 || O.q_grid < 2 || O.r_max < 0)
                throw ValidationError("optimizer: invalid settings");
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return c;
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError("malformed config " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

}  // namespace fedpq
