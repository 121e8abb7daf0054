// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fedpq/config.hpp"
#include "fedpq/rng.hpp"

namespace fedpq {

/// Zero-mean GP with RBF kernel exp(-||x - x'||^2 / (2 l^2)).
class GpSurrogate {
public:
    explicit GpSurrogate(double length_scale = 0.2, double jitter = 1e-8) : l_(length_scale), jitter_(jitter) {}

    double kernel(const std::vector<double>& a, const std::vector<double>& b) const {
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
        return std::exp(-d2 / (2.0 * l_ * l_));
    }

    void fit(std::vector<std::vector<double>> X, std::vector<double> y) {
        if (X.empty() || X.size() != y.size()) throw std::invalid_argument("GpSurrogate::fit: need matching, non-empty data");
        X_ = std::move(X);
        y_ = std::move(y);
        const auto n = static_cast<Eigen::Index>(X_.size());
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                double k = kernel(X_[static_cast<std::size_t>(i)], X_[static_cast<std::size_t>(j)]);
                K(i, j) = K(j, i) = k;
            }
        K.diagonal().array() += jitter_;
        llt_.compute(K);
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("GpSurrogate: kernel matrix not positive definite; increase jitter or remove duplicate points");
        Eigen::Map<const Eigen::VectorXd> yv(y_.data(), n);
        alpha_ = llt_.solve(yv);
    }

    /// Posterior mean and variance at x; the variance is clamped at zero.
    std::pair<double, double> posterior(const std::vector<double>& x) const {
        if (X_.empty()) throw std::logic_error("GpSurrogate::posterior: no observations");
        const auto n = static_cast<Eigen::Index>(X_.size());
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i) k(i) = kernel(X_[static_cast<std::size_t>(i)], x);
        const double mu = k.dot(alpha_);
        Eigen::VectorXd v = llt_.matrixL().solve(k);
        const double var = std::max(kernel(x, x) - v.squaredNorm(), 0.0);
        return {mu, var};
    }

    double best() const { return *std::min_element(y_.begin(), y_.end()); }
    std::size_t size() const { return X_.size(); }
    double length_scale() const { return l_; }
    double jitter() const { return jitter_; }

private:
    double l_, jitter_;
    std::vector<std::vector<double>> X_;
    std::vector<double> y_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
};

inline std::pair<double, double> gp_posterior(const GpSurrogate& gp, const std::vector<double>& x) { return gp.posterior(x); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Standardized PI score (mu - H* - varsigma) / sigma; smaller is better.
/// sigma = 0 maps to -inf when mu < H* + varsigma and +inf otherwise.
inline double pi_score(double mu, double var, double h_star, double varsigma) {
    const double sigma = std::sqrt(var);
    const double num = mu - h_star - varsigma;
    if (sigma == 0.0) return num < 0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return num / sigma;
}

/// theta = 1 - Phi((mu - H* - varsigma) / sigma).
inline double pi_acquisition(double mu, double var, double h_star, double varsigma) {
    const double z = pi_score(mu, var, h_star, varsigma);
    if (std::isinf(z)) return z < 0 ? 1.0 : 0.0;
    return 1.0 - normal_cdf(z);
}

inline double pi_acquisition(const GpSurrogate& gp, const std::vector<double>& x, double varsigma) {
    auto [mu, var] = gp.posterior(x);
    return pi_acquisition(mu, var, gp.best(), varsigma);
}

struct Block {
    std::vector<double> lo, hi;
    bool integer = false;
    std::string name;

    std::size_t dim() const { return lo.size(); }
};

struct BoSettings {
    double length_scale = 0.2;
    double jitter = 1e-8;
    int candidates = 1024;
    int grid = 512;
    int init_points = 1;
    double varsigma_fraction = 0.01;
};

/// Stand-in value for non-finite objective results.
inline constexpr double kNonFinitePenalty = 1e12;

struct BoResult {
    std::vector<double> x;
    double value = 0.0;
    std::vector<std::vector<double>> X;
    std::vector<double> H;
};

namespace detail {

inline std::vector<double> to_unit(const Block& b, const std::vector<double>& x) {
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = b.hi[i] > b.lo[i] ? (x[i] - b.lo[i]) / (b.hi[i] - b.lo[i]) : 0.0;
    return z;
}

inline std::vector<double> from_unit(const Block& b, const std::vector<double>& z) {
    std::vector<double> x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        double v = b.lo[i] + std::clamp(z[i], 0.0, 1.0) * (b.hi[i] - b.lo[i]);
        if (b.integer) v = std::clamp(std::round(v), b.lo[i], b.hi[i]);
        x[i] = v;
    }
    return x;
}

inline bool seen(const std::vector<std::vector<double>>& X, const std::vector<double>& x) {
    return std::find(X.begin(), X.end(), x) != X.end();
}

}  // namespace detail

/// Candidate points for one acquisition step.
///
/// One-dimensional blocks use a dense grid (or every lattice point); vector
/// blocks use `candidates` points: half uniform in the box, a quarter on the
/// diagonal x_i = t, and a quarter perturbing the incumbent.
inline std::vector<std::vector<double>> acquisition_candidates(const Block& b, const BoSettings& st,
                                                               const std::vector<double>& incumbent, Stream& s) {
    std::vector<std::vector<double>> out;
    const std::size_t n = b.dim();
    if (n == 1) {
        if (b.integer) {
            for (double v = b.lo[0]; v <= b.hi[0]; v += 1.0) out.push_back({v});
        } else {
            for (int i = 0; i < st.grid; ++i)
                out.push_back({b.lo[0] + (b.hi[0] - b.lo[0]) * static_cast<double>(i) / (st.grid - 1)});
        }
        return out;
    }
    const int total = st.candidates;
    const int n_diag = total / 4, n_local = total / 4, n_uniform = total - n_diag - n_local;
    std::vector<double> z(n);
    for (int i = 0; i < n_uniform; ++i) {
        for (auto& v : z) v = s.uniform();
        out.push_back(detail::from_unit(b, z));
    }
    for (int i = 0; i < n_diag; ++i) {
        const double t = n_diag > 1 ? static_cast<double>(i) / (n_diag - 1) : 0.5;
        std::fill(z.begin(), z.end(), t);
        out.push_back(detail::from_unit(b, z));
    }
    const auto zi = detail::to_unit(b, incumbent);
    for (int i = 0; i < n_local; ++i) {
        const double scale = 0.3 * std::pow(0.5, i % 5);
        for (std::size_t k = 0; k < n; ++k) z[k] = zi[k] + scale * s.normal();
        out.push_back(detail::from_unit(b, z));
    }
    return out;
}

/// GP/PI minimization of a black-box objective over one block.
///
/// `budget` counts objective evaluations. The first is at `start` when given,
/// the rest of the initial design is uniform random. Each later step evaluates
/// the unevaluated candidate with the highest PI; the GP is fitted to
/// standardized values with penalties clipped to the observed finite range.
inline BoResult bo_minimize(const Block& b, const std::function<double(const std::vector<double>&)>& f, int budget,
                            Stream& s, const BoSettings& st = {}, const std::vector<double>* start = nullptr) {
    if (budget < 1) throw std::invalid_argument("bo_minimize: budget must be >= 1");
    if (b.dim() == 0 || b.hi.size() != b.dim()) throw std::invalid_argument("bo_minimize: bad block");
    for (std::size_t i = 0; i < b.dim(); ++i)
        if (!(b.lo[i] <= b.hi[i])) throw std::invalid_argument("bo_minimize: block bound lo > hi");
    BoResult r;
    auto evaluate = [&](const std::vector<double>& x) {
        double h = f(x);
        if (!std::isfinite(h)) h = kNonFinitePenalty;
        r.X.push_back(x);
        r.H.push_back(h);
    };
    if (start) evaluate(detail::from_unit(b, detail::to_unit(b, *start)));
    std::vector<double> z(b.dim());
    while (static_cast<int>(r.X.size()) < std::min(budget, std::max(st.init_points, 1) + (start ? 1 : 0))) {
        for (auto& v : z) v = s.uniform();
        evaluate(detail::from_unit(b, z));
    }
    const double varsigma_raw = st.varsigma_fraction * std::abs(r.H.front());
    while (static_cast<int>(r.X.size()) < budget) {
        double lo = INFINITY, hi = -INFINITY;
        for (double h : r.H)
            if (h < kNonFinitePenalty) {
                lo = std::min(lo, h);
                hi = std::max(hi, h);
            }
        if (!std::isfinite(lo)) lo = hi = 0.0;
        std::vector<double> y;
        for (double h : r.H) y.push_back(h < kNonFinitePenalty ? h : hi + (hi - lo) + 1.0);
        double mean = 0.0, sd = 0.0;
        for (double v : y) mean += v / static_cast<double>(y.size());
        for (double v : y) sd += (v - mean) * (v - mean) / static_cast<double>(y.size());
        sd = std::sqrt(sd);
        if (!(sd > 0)) sd = std::max(std::abs(mean), 1.0);
        for (auto& v : y) v = (v - mean) / sd;
        std::vector<std::vector<double>> U;
        for (const auto& x : r.X) U.push_back(detail::to_unit(b, x));
        GpSurrogate gp(st.length_scale, st.jitter);
        gp.fit(U, y);
        const double h_star = gp.best();
        // The trade-off enters as a required improvement: threshold H* - varsigma.
        const double varsigma = -varsigma_raw / sd;

        const auto inc = r.X[static_cast<std::size_t>(std::min_element(r.H.begin(), r.H.end()) - r.H.begin())];
        auto cands = acquisition_candidates(b, st, inc, s);
        double best_score = INFINITY;
        const std::vector<double>* pick = nullptr;
        for (const auto& c : cands) {
            if (detail::seen(r.X, c)) continue;
            auto [mu, var] = gp.posterior(detail::to_unit(b, c));
            double sc = pi_score(mu, var, h_star, varsigma);
            if (sc < best_score || pick == nullptr) {
                best_score = sc;
                pick = &c;
            }
        }
        if (!pick) break;  // every candidate already evaluated
        evaluate(*pick);
    }
    auto it = std::min_element(r.H.begin(), r.H.end());
    r.x = r.X[static_cast<std::size_t>(it - r.H.begin())];
    r.value = *it;
    return r;
}

struct BcdBudgets {
    int q = 20, delta = 40, rho = 40, bits = 40;
};

struct BcdTraceRow {
    int iteration = 0;
    std::string block;
    std::vector<double> point;
    double block_value = 0.0;
    bool accepted = false;
    double best = 0.0;
};

struct BcdResult {
    StrategyVector strategy;
    double H = 0.0;
    int iterations = 0;
    std::vector<double> history;  // best-so-far after each iteration, starting with H_0
    std::vector<BcdTraceRow> trace;
};

struct BcdProblem {
    std::function<double(const StrategyVector&)> objective;
    Bounds bounds;
    double q_lo = 0.0, q_hi = 1.0;
};

/// Block coordinate descent over q -> delta_aug -> rho -> bits with a best-so-far guard.
inline BcdResult bcd_optimize(const StrategyVector& initial, const BcdProblem& P, double eps_tol, int r_max,
                              const BcdBudgets& budgets, Stream& s, const BoSettings& st = {}) {
    const std::size_t U = initial.size();
    {
        StrategyVector chk = initial;
        chk.p.clear();
        validate_strategy(chk, P.bounds, U);
        if (!(initial.q >= P.q_lo && initial.q <= P.q_hi)) throw ValidationError("bcd_optimize: initial q outside its block bounds");
    }
    BcdResult R;
    R.strategy = initial;
    R.H = P.objective(initial);
    if (!std::isfinite(R.H)) R.H = kNonFinitePenalty;
    R.history.push_back(R.H);
    double gap = INFINITY;
    int r = 0;
    const auto& B = P.bounds;
    while (r < r_max && gap >= eps_tol) {
        const double prev = R.H;
        auto run_block = [&](const std::string& name, Block blk, int budget, auto get, auto set) {
            if (budget <= 0) return;
            auto start = get(R.strategy);
            auto fb = [&](const std::vector<double>& x) {
                StrategyVector t = R.strategy;
                set(t, x);
                return P.objective(t);
            };
            blk.name = name;
            auto res = bo_minimize(blk, fb, budget, s, st, &start);
            BcdTraceRow row{r + 1, name, res.x, res.value, false, R.H};
            if (res.value <= R.H) {
                set(R.strategy, res.x);
                R.H = res.value;
                row.accepted = true;
            }
            row.best = R.H;
            R.trace.push_back(row);
        };
        run_block(
            "q", Block{{P.q_lo}, {P.q_hi}, false, ""}, budgets.q, [](const StrategyVector& t) { return std::vector<double>{t.q}; },
            [](StrategyVector& t, const std::vector<double>& x) { t.q = x[0]; });
        run_block(
            "delta_aug", Block{std::vector<double>(U, B.delta_aug_min), std::vector<double>(U, B.delta_aug_max), false, ""},
            budgets.delta, [](const StrategyVector& t) { return t.delta_aug; },
            [](StrategyVector& t, const std::vector<double>& x) { t.delta_aug = x; });
        run_block(
            "rho", Block{std::vector<double>(U, B.rho_min), std::vector<double>(U, B.rho_max), false, ""}, budgets.rho,
            [](const StrategyVector& t) { return t.rho; }, [](StrategyVector& t, const std::vector<double>& x) { t.rho = x; });
        run_block(
            "bits",
            Block{std::vector<double>(U, static_cast<double>(B.bits_min)), std::vector<double>(U, static_cast<double>(B.bits_max)),
                  true, ""},
            budgets.bits,
            [](const StrategyVector& t) { return std::vector<double>(t.bits.begin(), t.bits.end()); },
            [](StrategyVector& t, const std::vector<double>& x) {
                for (std::size_t i = 0; i < x.size(); ++i) t.bits[i] = static_cast<int>(x[i]);
            });
        ++r;
        R.history.push_back(R.H);
        gap = prev != 0.0 ? std::abs(R.H - prev) / std::abs(prev) : std::abs(R.H - prev);
    }
    R.iterations = r;
    return R;
}

}  // namespace fedpq
