// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

namespace fedpq {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch: nodes and weights from the Jacobi matrix of a three-term recurrence.
inline QuadratureRule golub_welsch(const std::vector<double>& diag, const std::vector<double>& offdiag, double mu0) {
    const auto n = static_cast<Eigen::Index>(diag.size());
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(diag.data(), n);
    Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(offdiag.data(), n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    QuadratureRule r;
    r.nodes.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double v0 = es.eigenvectors()(0, i);
        r.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
        r.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
    }
    return r;
}

/// n-point Gauss-Laguerre rule for the weight e^{-x} on [0, inf).
inline QuadratureRule gauss_laguerre(int n) {
    std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n - 1));
    for (int k = 0; k < n; ++k) a[static_cast<std::size_t>(k)] = 2.0 * k + 1.0;
    for (int k = 1; k < n; ++k) b[static_cast<std::size_t>(k - 1)] = k;
    auto r = golub_welsch(a, b, 1.0);
    // Newton-polish the nodes, then take w = x / ((n+1) L_{n+1}(x))^2, which keeps
    // full relative accuracy in the tiny weights at large nodes.
    auto laguerre = [n](long double x, long double& d) {
        long double p0 = 1.0L, p1 = 1.0L - x;
        for (int k = 1; k < n; ++k) {
            const long double p2 = ((2.0L * k + 1.0L - x) * p1 - k * p0) / (k + 1.0L);
            p0 = p1;
            p1 = p2;
        }
        d = n * (p1 - p0) / x;  // L_n'(x)
        return std::pair{p1, p0};
    };
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
        long double x = r.nodes[i], d = 0.0L;
        for (int it = 0; it < 3; ++it) x -= laguerre(x, d).first / d;
        const auto [ln, lm] = laguerre(x, d);
        const long double next = ((2.0L * n + 1.0L - x) * ln - n * lm) / (n + 1.0L);
        r.nodes[i] = static_cast<double>(x);
        r.weights[i] = static_cast<double>(x / ((n + 1.0L) * (n + 1.0L) * next * next));
    }
    return r;
}

/// n-point Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(int n) {
    std::vector<double> a(static_cast<std::size_t>(n), 0.0), b(static_cast<std::size_t>(n - 1));
    for (int k = 1; k < n; ++k) b[static_cast<std::size_t>(k - 1)] = k / std::sqrt(4.0 * k * k - 1.0);
    return golub_welsch(a, b, 2.0);
}

/// Fixed-node rule for E[h(Z)] with Z ~ Exp(1).
///
/// The tail [1, inf) uses 64-node Gauss-Laguerre after the shift z = 1 + x.
/// The head [0, 1] uses 16-point Gauss-Legendre on geometrically graded panels
/// [2^-(k+1), 2^-k], k < 48, plus [0, 2^-48].
class ExponentialExpectation {
public:
    ExponentialExpectation() {
        auto lag = gauss_laguerre(64);
        const double e1 = std::exp(-1.0);
        for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
            nodes_.push_back(1.0 + lag.nodes[i]);
            weights_.push_back(e1 * lag.weights[i]);
        }
        auto leg = gauss_legendre(16);
        auto panel = [&](double a, double b) {
            double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (std::size_t i = 0; i < leg.nodes.size(); ++i) {
                double z = mid + half * leg.nodes[i];
                nodes_.push_back(z);
                weights_.push_back(half * leg.weights[i] * std::exp(-z));
            }
        };
        double hi = 1.0;
        for (int k = 0; k < 48; ++k) {
            panel(0.5 * hi, hi);
            hi *= 0.5;
        }
        panel(0.0, hi);
    }

    template <class F>
    double operator()(F&& h) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * h(nodes_[i]);
        return s;
    }

    std::size_t size() const { return nodes_.size(); }

    static const ExponentialExpectation& instance() {
        static const ExponentialExpectation rule;
        return rule;
    }

private:
    std::vector<double> nodes_, weights_;
};

}  // namespace fedpq
