// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpq/channel.hpp"
#include "fedpq/config.hpp"
#include "fedpq/data.hpp"

namespace fedpq {

struct EnergyBreakdown {
    double E_gen = 0.0, E_tr = 0.0, E_cu = 0.0;
    double T_gen = 0.0, T_tr = 0.0, T_cu = 0.0;

    double round_energy() const { return E_tr + E_cu; }
    double round_time() const { return T_tr + T_cu; }
};

/// Energy per CPU cycle-second, varrho * f^gamma.
inline double cpu_power(const DeviceProfile& d, const SystemConstants& k) { return k.varrho * std::pow(d.f, k.gamma_exp); }

inline std::uint64_t payload_bits(std::size_t V, int bits, const SystemConstants& k) {
    return static_cast<std::uint64_t>(V) * static_cast<std::uint64_t>(bits) + static_cast<std::uint64_t>(k.o_bits);
}

/// Training and upload cost of one round for one device at a known uplink rate.
inline EnergyBreakdown round_energy(const DeviceProfile& d, double rho, int bits, double p, double rate,
                                    const SystemConstants& k, std::size_t V) {
    if (!(rate > 0)) throw std::domain_error("device " + std::to_string(d.id) + ": uplink rate is zero");
    EnergyBreakdown e;
    e.T_tr = static_cast<double>(k.b) * k.c_tr * (1.0 - rho) / d.f;
    e.E_tr = cpu_power(d, k) * e.T_tr;
    e.T_cu = static_cast<double>(payload_bits(V, bits, k)) / rate;
    e.E_cu = p * e.T_cu;
    return e;
}

/// Strategy entries are looked up by the profile's id.
inline EnergyBreakdown per_round_energy(const DeviceProfile& d, const StrategyVector& s, const SystemConstants& k,
                                        std::size_t V) {
    const auto u = static_cast<std::size_t>(d.id);
    const double p = s.p.at(u);
    return round_energy(d, s.rho.at(u), s.bits.at(u), p, expected_rate(d, p, k), k, V);
}

/// Returns (E_gen, T_gen) for generating plan.total_gen samples.
inline std::pair<double, double> generation_energy(const DeviceProfile& d, const AugmentationPlan& plan,
                                                   const SystemConstants& k) {
    const double T = static_cast<double>(plan.total_gen) * k.c_gen / d.f;
    return {cpu_power(d, k) * T, T};
}

/// tau_u = D_mix,u / sum D_mix from augmentation plans.
inline std::vector<double> tau_from_plans(const std::vector<AugmentationPlan>& plans) {
    std::vector<double> sizes;
    CompensatedSum total;
    for (const auto& p : plans) {
        double n = 0;
        for (long m : p.mix) n += static_cast<double>(m);
        sizes.push_back(n);
        total.add(n);
    }
    const double T = total.value();
    if (!(T > 0)) throw std::invalid_argument("tau_from_plans: no data on any device");
    for (auto& s : sizes) s /= T;
    return sizes;
}

/// H = Omega * sum_u tau_u (E_tr + E_cu) + sum_u E_gen, with precomputed rates.
inline double total_energy(const std::vector<DeviceProfile>& devs, const StrategyVector& s, const SystemConstants& k,
                           double Omega, std::size_t V, const std::vector<AugmentationPlan>& plans,
                           const std::vector<double>& rates) {
    if (!(Omega >= 0)) throw std::invalid_argument("total_energy: Omega must be >= 0");
    auto tau = tau_from_plans(plans);
    CompensatedSum per_round, gen;
    for (std::size_t u = 0; u < devs.size(); ++u) {
        auto e = round_energy(devs[u], s.rho[u], s.bits[u], s.p[u], rates[u], k, V);
        per_round.add(tau[u] * e.round_energy());
        gen.add(generation_energy(devs[u], plans[u], k).first);
    }
    return Omega * per_round.value() + gen.value();
}

inline double total_energy(const std::vector<DeviceProfile>& devs, const StrategyVector& s, const SystemConstants& k,
                           double Omega, std::size_t V, const std::vector<AugmentationPlan>& plans) {
    std::vector<double> rates;
    for (std::size_t u = 0; u < devs.size(); ++u) rates.push_back(expected_rate(devs[u], s.p[u], k));
    return total_energy(devs, s, k, Omega, V, plans, rates);
}

}  // namespace fedpq
