// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "fedpq/analysis.hpp"
#include "fedpq/channel.hpp"
#include "fedpq/config.hpp"
#include "fedpq/data.hpp"
#include "fedpq/energy.hpp"
#include "fedpq/engine.hpp"

namespace fedpq {

struct ObjectiveValue {
    double H = 0.0;
    double Omega = 0.0;  // rounds charged, including the infeasibility substitute
    bool omega_feasible = true;
    bool power_feasible = true;
    double per_round = 0.0;
    double generation = 0.0;
    RoundsResult rounds;
};

/// Expected total energy for a strategy, with the round count from the uniform-q bound.
///
/// Powers come from the common q (cached per q). When the bound gives no
/// finite round count, `infeasible_rounds` rounds are charged instead.
class AnalyticObjective {
public:
    AnalyticObjective(std::vector<DeviceProfile> devices, SystemConstants k, Bounds b, int S, double epsilon,
                      std::size_t V, ClassGradientTable table, double infeasible_rounds)
        : devs_(std::move(devices)), k_(std::move(k)), b_(b), S_(S), eps_(epsilon), V_(V), table_(std::move(table)),
          infeasible_rounds_(infeasible_rounds) {
        for (const auto& d : devs_) {
            q_lo_ = std::max(q_lo_, error_probability(d, b_.p_max, k_));
            q_hi_ = std::max(q_hi_, error_probability(d, b_.p_min, k_));
        }
    }

    /// Search interval for q: from the largest q at p_max to the largest q at p_min.
    double q_lo() const { return q_lo_; }
    double q_hi() const { return q_hi_; }

    const std::vector<ChannelState>& fleet(double q) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(q);
        if (it == cache_.end()) it = cache_.emplace(q, solve_fleet(devs_, q, k_, b_)).first;
        return it->second;
    }

    ObjectiveValue evaluate(const StrategyVector& s) const {
        ObjectiveValue out;
        const auto& ch = fleet(s.q);
        std::vector<AugmentationPlan> plans;
        for (std::size_t u = 0; u < devs_.size(); ++u) plans.push_back(plan_augmentation(devs_[u].class_counts, s.delta_aug[u]));
        const auto tau = tau_from_plans(plans);
        SystemConstants k = k_;
        if (!table_.real.empty()) k.Z2 = predicted_z2(table_, plans, tau);
        out.rounds = rounds_to_epsilon(k, s, tau, S_, eps_);
        out.omega_feasible = out.rounds.feasible;
        out.Omega = out.omega_feasible ? static_cast<double>(out.rounds.Omega) : infeasible_rounds_;
        CompensatedSum per, gen;
        for (std::size_t u = 0; u < devs_.size(); ++u) {
            out.power_feasible = out.power_feasible && ch[u].feasible;
            per.add(tau[u] * round_energy(devs_[u], s.rho[u], s.bits[u], ch[u].p, ch[u].rate, k_, V_).round_energy());
            gen.add(generation_energy(devs_[u], plans[u], k_).first);
        }
        out.per_round = per.value();
        out.generation = gen.value();
        out.H = out.Omega * out.per_round + out.generation;
        return out;
    }

    double operator()(const StrategyVector& s) const { return evaluate(s).H; }

    const SystemConstants& constants() const { return k_; }
    const std::vector<DeviceProfile>& devices() const { return devs_; }

private:
    std::vector<DeviceProfile> devs_;
    SystemConstants k_;
    Bounds b_;
    int S_;
    double eps_;
    std::size_t V_;
    ClassGradientTable table_;
    double infeasible_rounds_;
    double q_lo_ = 0.0, q_hi_ = 0.0;
    mutable std::mutex mu_;
    mutable std::map<double, std::vector<ChannelState>> cache_;
};

}  // namespace fedpq
