// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpq/config.hpp"
#include "fedpq/rng.hpp"

namespace fedpq {

enum class WeightMethod { ExactEnumeration, MonteCarlo, UniformClosedForm };

inline const char* to_string(WeightMethod m) {
    switch (m) {
        case WeightMethod::ExactEnumeration: return "exact-enumeration";
        case WeightMethod::MonteCarlo: return "monte-carlo";
        case WeightMethod::UniformClosedForm: return "uniform-closed-form";
    }
    return "unknown";
}

struct ParticipationWeights {
    std::vector<double> beta_bar;
    std::vector<double> alpha_bar;
    std::vector<double> beta_se;   // Monte Carlo only
    std::vector<double> alpha_se;  // Monte Carlo only
    WeightMethod method = WeightMethod::ExactEnumeration;
};

class EnumerationTooLarge : public std::length_error {
    using std::length_error::length_error;
};

inline constexpr double kEnumerationLimit = 1e6;

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

/// Exact beta_bar and alpha_bar over all U^S ordered draws and their success patterns.
///
/// For each ordered tuple the success subsets are summed by slot: slot s
/// contributes (1 - q_s) * E[1/k] (resp. E[1/k^2]) where k = 1 + successes
/// among the other slots, which has a Poisson-binomial law.
inline ParticipationWeights enumerate_weights(const std::vector<double>& tau, const std::vector<double>& q, int S) {
    const std::size_t U = tau.size();
    if (q.size() != U) throw std::invalid_argument("enumerate_weights: tau and q sizes differ");
    if (S < 1) throw std::invalid_argument("enumerate_weights: S must be >= 1");
    if (std::pow(static_cast<double>(U), S) > kEnumerationLimit)
        throw EnumerationTooLarge("enumerate_weights: U^S exceeds 1e6; use monte_carlo_weights");
    for (double x : q)
        if (!(x >= 0 && x < 1)) throw std::invalid_argument("enumerate_weights: q entries must be in [0, 1)");

    std::vector<CompensatedSum> beta(U), alpha(U);
    std::vector<std::size_t> slot(static_cast<std::size_t>(S), 0);
    std::vector<double> pmf(static_cast<std::size_t>(S) + 1);
    for (;;) {
        double prob = 1.0, allfail = 1.0;
        for (auto u : slot) {
            prob *= tau[u];
            allfail *= q[u];
        }
        if (prob > 0.0) {
            const double norm = prob / (1.0 - allfail);
            for (int s = 0; s < S; ++s) {
                // success-count law of the other slots
                std::fill(pmf.begin(), pmf.end(), 0.0);
                pmf[0] = 1.0;
                int n = 0;
                for (int r = 0; r < S; ++r) {
                    if (r == s) continue;
                    const double pr = 1.0 - q[slot[static_cast<std::size_t>(r)]];
                    for (int j = n + 1; j >= 1; --j)
                        pmf[static_cast<std::size_t>(j)] =
                            pmf[static_cast<std::size_t>(j)] * (1.0 - pr) + pmf[static_cast<std::size_t>(j - 1)] * pr;
                    pmf[0] *= (1.0 - pr);
                    ++n;
                }
                double e1 = 0.0, e2 = 0.0;
                for (int j = 0; j <= n; ++j) {
                    const double k = j + 1.0;
                    e1 += pmf[static_cast<std::size_t>(j)] / k;
                    e2 += pmf[static_cast<std::size_t>(j)] / (k * k);
                }
                const auto u = slot[static_cast<std::size_t>(s)];
                const double ps = 1.0 - q[u];
                beta[u].add(norm * ps * e1);
                alpha[u].add(norm * ps * e2);
            }
        }
        int pos = 0;
        while (pos < S && ++slot[static_cast<std::size_t>(pos)] == U) slot[static_cast<std::size_t>(pos++)] = 0;
        if (pos == S) break;
    }
    ParticipationWeights w;
    w.method = WeightMethod::ExactEnumeration;
    for (std::size_t u = 0; u < U; ++u) {
        w.beta_bar.push_back(beta[u].value());
        w.alpha_bar.push_back(alpha[u].value());
    }
    return w;
}

/// Sample means of the per-round aggregation coefficients. Each trial draws the
/// participant multiset once and redraws its outages until at least one succeeds.
inline ParticipationWeights monte_carlo_weights(const std::vector<double>& tau, const std::vector<double>& q, int S,
                                                long trials, Stream& s, int resample_cap = 10000) {
    const std::size_t U = tau.size();
    if (trials < 1) throw std::invalid_argument("monte_carlo_weights: trials must be >= 1");
    if (q.size() != U) throw std::invalid_argument("monte_carlo_weights: tau and q sizes differ");
    std::vector<double> cdf(U);
    double acc = 0.0;
    for (std::size_t u = 0; u < U; ++u) cdf[u] = (acc += tau[u]);
    auto draw = [&]() {
        double r = s.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        auto u = static_cast<std::size_t>(it - cdf.begin());
        if (u >= U) u = U - 1;
        while (tau[u] <= 0.0 && u > 0) --u;
        return u;
    };
    std::vector<double> m1(U, 0.0), m2(U, 0.0), a1(U, 0.0), a2(U, 0.0);
    std::vector<int> hits(U, 0);
    std::vector<std::size_t> touched, slots(static_cast<std::size_t>(S));
    for (long t = 0; t < trials; ++t) {
        int k = 0, attempt = 0;
        for (auto& u : slots) u = draw();
        for (;;) {
            touched.clear();
            k = 0;
            for (auto u : slots) {
                if (s.uniform() >= q[u]) {
                    if (hits[u]++ == 0) touched.push_back(u);
                    ++k;
                }
            }
            if (k > 0) break;
            if (++attempt >= resample_cap)
                throw std::runtime_error("monte_carlo_weights: no successful device after resampling cap");
        }
        for (auto u : touched) {
            const double b = static_cast<double>(hits[u]) / k;
            const double a = b / k;
            m1[u] += b;
            m2[u] += b * b;
            a1[u] += a;
            a2[u] += a * a;
            hits[u] = 0;
        }
    }
    ParticipationWeights w;
    w.method = WeightMethod::MonteCarlo;
    const double n = static_cast<double>(trials);
    for (std::size_t u = 0; u < U; ++u) {
        const double mb = m1[u] / n, ma = a1[u] / n;
        w.beta_bar.push_back(mb);
        w.alpha_bar.push_back(ma);
        w.beta_se.push_back(std::sqrt(std::max(m2[u] / n - mb * mb, 0.0) / n));
        w.alpha_se.push_back(std::sqrt(std::max(a2[u] / n - ma * ma, 0.0) / n));
    }
    return w;
}

/// Effective participant count (1 - q^S) / sum_k (1/k) C(S,k) (1-q)^k q^(S-k).
inline double s_bar(double q, int S) {
    if (!(q >= 0 && q < 1)) throw std::invalid_argument("s_bar: q must be in [0, 1)");
    if (S < 1) throw std::invalid_argument("s_bar: S must be >= 1");
    double den = 0.0;
    for (int k = 1; k <= S; ++k) den += binomial(S, k) * std::pow(1.0 - q, k) * std::pow(q, S - k) / k;
    return (1.0 - std::pow(q, S)) / den;
}

inline ParticipationWeights uniform_weights(const std::vector<double>& tau, double q, int S) {
    ParticipationWeights w;
    w.method = WeightMethod::UniformClosedForm;
    const double sb = s_bar(q, S);
    w.beta_bar = tau;
    for (double t : tau) w.alpha_bar.push_back(t / sb);
    return w;
}

struct BoundReport {
    double gap_term = 0.0;
    double chi2_term = 0.0;
    double alpha_z2_term = 0.0;
    double pruning_term = 0.0;
    double quantization_term = 0.0;
    double dispersion_term = 0.0;
    double sigma2_term = 0.0;
    double total = 0.0;
    double chi2 = 0.0;
    double denominator = 0.0;  // eta/2 - 8 L eta^2
    double Psi = 0.0;
    long long Omega = 0;
    bool omega_feasible = true;
    bool uniform_q = false;
};

class StepSizeError : public std::domain_error {
    using std::domain_error::domain_error;
};

inline double bound_denominator(const SystemConstants& k) {
    if (!(k.L > 0 && k.eta > 0 && k.eta < 1.0 / (16.0 * k.L)))
        throw StepSizeError("step-size condition violated: need 0 < eta < 1/(16 L)");
    return k.eta / 2.0 - 8.0 * k.L * k.eta * k.eta;
}

inline double quantization_divisor(int bits) {
    const double top = std::ldexp(1.0, bits) - 1.0;
    return 4.0 * top * top;
}

/// Right-hand side of the average squared-gradient-norm bound after Omega rounds.
/// q_u holds per-device error probabilities; with all q_u equal the chi-square
/// and dispersion terms are reported as zero.
inline BoundReport evaluate_bound(const SystemConstants& k, const ParticipationWeights& w, const StrategyVector& s,
                                     const std::vector<double>& tau, const std::vector<double>& q_u, int S,
                                     double Omega) {
    const std::size_t U = tau.size();
    if (!(Omega > 0)) throw std::invalid_argument("evaluate_bound: Omega must be > 0");
    if (w.beta_bar.size() != U || w.alpha_bar.size() != U || q_u.size() != U || s.rho.size() != U ||
        k.Z2.size() != U || k.grad_range2.size() != U)
        throw std::invalid_argument("evaluate_bound: size mismatch");
    const double D = bound_denominator(k);
    const double L = k.L, eta = k.eta;
    BoundReport r;
    r.denominator = D;

    CompensatedSum chi2, tauZ, aZ, b2, rho_sum, brho, quant, asig, qbar_s;
    double qmax = 0.0, qmin = 1.0;
    for (std::size_t u = 0; u < U; ++u) {
        const double d = w.beta_bar[u] - tau[u];
        chi2.add(d * d);
        tauZ.add(tau[u] * k.Z2[u]);
        aZ.add(w.alpha_bar[u] * k.Z2[u]);
        b2.add(w.beta_bar[u] * w.beta_bar[u]);
        rho_sum.add(s.rho[u]);
        brho.add(w.beta_bar[u] * s.rho[u]);
        quant.add(w.alpha_bar[u] * k.grad_range2[u] / quantization_divisor(s.bits[u]));
        asig.add(w.alpha_bar[u] * k.sigma2);
        qbar_s.add(tau[u] * q_u[u]);
        qmax = std::max(qmax, q_u[u]);
        qmin = std::min(qmin, q_u[u]);
    }
    r.uniform_q = (qmax == qmin);
    r.chi2 = chi2.value();
    const double qbar = qbar_s.value();

    CompensatedSum disp;
    for (std::size_t u = 0; u < U; ++u) {
        const double dq = q_u[u] - qbar;
        disp.add(tau[u] * dq * dq * k.Z2[u]);
    }
    double coeff = 0.0;
    for (int kk = 2; kk <= S; ++kk) coeff += std::pow(qmax, S - kk) * binomial(S, kk);
    coeff /= (1.0 - std::pow(qmax, S));

    r.gap_term = k.loss_gap / (D * Omega);
    r.chi2_term = eta * r.chi2 * tauZ.value() / D;
    r.alpha_z2_term = 8.0 * L * eta * eta * aZ.value() / D;
    r.pruning_term = eta * L * L * k.Gamma2 * (b2.value() * rho_sum.value() + 4.0 * eta * L * brho.value()) / D;
    r.quantization_term = L * eta * eta * quant.value() / D;
    r.dispersion_term = r.uniform_q ? 0.0 : 8.0 * L * eta * eta * coeff * disp.value() / D;
    r.sigma2_term = 2.0 * L * eta * eta * asig.value() / D;
    if (r.uniform_q) r.chi2_term = 0.0;
    r.total = r.gap_term + r.chi2_term + r.alpha_z2_term + r.pruning_term + r.quantization_term + r.dispersion_term +
              r.sigma2_term;
    return r;
}

struct RoundsResult {
    long long Omega = 0;
    double Psi = 0.0;
    double denominator = 0.0;  // (eta/2 - 8 L eta^2) eps - Psi
    bool feasible = false;
};

/// Residual Psi of the uniform-q bound, using grad_range2 as the worst-case ranges.
inline double residual_psi(const SystemConstants& k, const StrategyVector& s, const std::vector<double>& tau, int S) {
    const std::size_t U = tau.size();
    const double L = k.L, eta = k.eta;
    const double sb = s_bar(s.q, S);
    CompensatedSum t2, rho_sum, trho, quant, tZ;
    for (std::size_t u = 0; u < U; ++u) {
        t2.add(tau[u] * tau[u]);
        rho_sum.add(s.rho[u]);
        trho.add(tau[u] * s.rho[u]);
        quant.add(tau[u] / sb * k.grad_range2[u] / quantization_divisor(s.bits[u]));
        tZ.add(tau[u] / sb * k.Z2[u]);
    }
    const double pruning = eta * L * L * k.Gamma2 * (t2.value() * rho_sum.value() + 4.0 * eta * L * trho.value());
    const double quantization = L * eta * eta * quant.value();
    const double variance = 2.0 * L * eta * eta * (k.sigma2 / sb + 4.0 * tZ.value());
    return pruning + quantization + variance;
}

/// Smallest integer round count meeting the gradient-norm target epsilon.
inline RoundsResult rounds_to_epsilon(const SystemConstants& k, const StrategyVector& s, const std::vector<double>& tau,
                                      int S, double epsilon) {
    if (!(epsilon > 0)) throw std::invalid_argument("rounds_to_epsilon: epsilon must be > 0");
    if (s.rho.size() != tau.size() || s.bits.size() != tau.size() || k.Z2.size() != tau.size() ||
        k.grad_range2.size() != tau.size())
        throw std::invalid_argument("rounds_to_epsilon: size mismatch");
    const double D = bound_denominator(k);
    RoundsResult r;
    r.Psi = residual_psi(k, s, tau, S);
    r.denominator = D * epsilon - r.Psi;
    if (!(r.denominator > 0)) {
        r.feasible = false;
        r.Omega = std::numeric_limits<long long>::max();
        return r;
    }
    r.feasible = true;
    r.Omega = static_cast<long long>(std::ceil(k.loss_gap / r.denominator));
    return r;
}

}  // namespace fedpq
