// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedpq/config.hpp"
#include "fedpq/quadrature.hpp"
#include "fedpq/rng.hpp"

namespace fedpq {

struct ChannelState {
    int device = 0;
    double rate = 0.0;  // bit/s
    double q = 0.0;
    double p = 0.0;     // W
    bool feasible = true;
};

/// Interference-plus-noise power I + B*N0 in W.
inline double interference_plus_noise(const DeviceProfile& d, const SystemConstants& k) {
    return d.I + d.B_ul * k.noise_psd();
}

/// Mean SNR p/(d^2 (I + B N0)) for unit fading power.
inline double mean_snr(const DeviceProfile& d, double p, const SystemConstants& k) {
    return p / (d.d * d.d * interference_plus_noise(d, k));
}

/// Outage exponent a = upsilon (I + B N0) d^2 / p.
inline double outage_parameter(const DeviceProfile& d, double p, const SystemConstants& k) {
    return k.upsilon * interference_plus_noise(d, k) * d.d * d.d / p;
}

/// B * E[log2(1 + snr*zeta)] over unit-mean exponential zeta.
inline double expected_rate(const DeviceProfile& d, double p, const SystemConstants& k) {
    if (!(p > 0)) throw std::invalid_argument("expected_rate: power must be > 0");
    const double snr = mean_snr(d, p, k);
    const double e = ExponentialExpectation::instance()([&](double z) { return std::log1p(snr * z); });
    return d.B_ul * e / std::log(2.0);
}

/// E[1 - exp(-a/zeta)] over unit-mean exponential zeta.
inline double error_probability_from_a(double a) {
    if (!(a >= 0)) throw std::invalid_argument("error_probability: a must be >= 0");
    if (a == 0) return 0.0;
    return ExponentialExpectation::instance()([&](double z) { return -std::expm1(-a / z); });
}

inline double error_probability(const DeviceProfile& d, double p, const SystemConstants& k) {
    if (!(p > 0)) throw std::invalid_argument("error_probability: power must be > 0");
    return error_probability_from_a(outage_parameter(d, p, k));
}

/// Closed form 1 - 2 sqrt(a) K1(2 sqrt(a)).
inline double error_probability_bessel(double a) {
    if (a == 0) return 0.0;
    const double x = 2.0 * std::sqrt(a);
    return 1.0 - x * std::cyl_bessel_k(1.0, x);
}

struct PowerSolution {
    double p = 0.0;
    double q = 0.0;  // achieved
    bool feasible = true;
};

/// Bisection on [p_min, p_max] for error_probability(p) = q_target.
/// An unattainable target returns the nearer endpoint with feasible = false.
inline PowerSolution solve_power_for_q(const DeviceProfile& d, double q_target, const SystemConstants& k,
                                       const Bounds& b, double tol = 1e-9) {
    if (!(q_target > 0 && q_target < 1)) throw std::invalid_argument("solve_power_for_q: q_target must be in (0, 1)");
    const double q_hi_p = error_probability(d, b.p_max, k);
    const double q_lo_p = error_probability(d, b.p_min, k);
    if (std::abs(q_hi_p - q_target) < tol) return {b.p_max, q_hi_p, true};
    if (std::abs(q_lo_p - q_target) < tol) return {b.p_min, q_lo_p, true};
    if (q_target < q_hi_p) return {b.p_max, q_hi_p, false};
    if (q_target > q_lo_p) return {b.p_min, q_lo_p, false};
    double lo = b.p_min, hi = b.p_max;
    double p = 0.5 * (lo + hi), q = error_probability(d, p, k);
    for (int it = 0; it < 200; ++it) {
        p = 0.5 * (lo + hi);
        q = error_probability(d, p, k);
        if (std::abs(q - q_target) < 1e-3 * tol || hi - lo < 1e-15 * hi) break;
        if (q > q_target)
            lo = p;
        else
            hi = p;
    }
    return {p, q, std::abs(q - q_target) < tol};
}

/// Returns 1 (received) with probability 1 - q, else 0.
inline int sample_outage(double q, Stream& s) {
    if (!(q >= 0 && q <= 1)) throw std::invalid_argument("sample_outage: q outside [0, 1]");
    return s.uniform() < q ? 0 : 1;
}

/// Feasible common-q interval [max_u q_u(p_max), min_u q_u(p_min)]; empty when lo > hi.
inline std::pair<double, double> common_q_interval(const std::vector<DeviceProfile>& devs, const SystemConstants& k,
                                                   const Bounds& b) {
    double lo = 0.0, hi = 1.0;
    for (const auto& d : devs) {
        lo = std::max(lo, error_probability(d, b.p_max, k));
        hi = std::min(hi, error_probability(d, b.p_min, k));
    }
    return {lo, hi};
}

/// Solves every device's power for a common q.
inline std::vector<ChannelState> solve_fleet(const std::vector<DeviceProfile>& devs, double q, const SystemConstants& k,
                                             const Bounds& b) {
    std::vector<ChannelState> out;
    out.reserve(devs.size());
    for (const auto& d : devs) {
        auto sol = solve_power_for_q(d, q, k, b);
        out.push_back({d.id, expected_rate(d, sol.p, k), sol.q, sol.p, sol.feasible});
    }
    return out;
}

/// Channel states at fixed per-device powers.
inline std::vector<ChannelState> fleet_at_power(const std::vector<DeviceProfile>& devs, const std::vector<double>& p,
                                                const SystemConstants& k) {
    std::vector<ChannelState> out;
    out.reserve(devs.size());
    for (std::size_t u = 0; u < devs.size(); ++u)
        out.push_back({devs[u].id, expected_rate(devs[u], p[u], k), error_probability(devs[u], p[u], k), p[u], true});
    return out;
}

}  // namespace fedpq
