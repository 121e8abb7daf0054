// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpq/config.hpp"
#include "fedpq/data.hpp"
#include "fedpq/rng.hpp"

namespace fedpq {

/// Differentiable per-sample loss over a flat parameter vector.
class Model {
public:
    virtual ~Model() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<double> initial() const { return std::vector<double>(dim(), 0.0); }
    /// Adds scale * grad f(w; sample i) into g and returns f(w; sample i).
    virtual double accumulate(const std::vector<double>& w, const Dataset& d, std::size_t i, double scale,
                              double* g) const = 0;
    virtual double loss(const std::vector<double>& w, const Dataset& d, std::size_t i) const = 0;
    virtual int predict(const std::vector<double>& w, const Dataset& d, std::size_t i) const = 0;
};

/// Multinomial logistic regression; w holds C rows of (features + 1) with the bias last.
class SoftmaxRegression final : public Model {
public:
    SoftmaxRegression(int classes, int features) : C_(classes), F_(features) {}

    std::size_t dim() const override { return static_cast<std::size_t>(C_) * static_cast<std::size_t>(F_ + 1); }

    double accumulate(const std::vector<double>& w, const Dataset& d, std::size_t i, double scale,
                      double* g) const override {
        thread_local std::vector<double> p;
        const double* x = d.row(i);
        const double lse = logits(w, x, p);
        const int y = d.y[i];
        const double l = lse - p[static_cast<std::size_t>(y)];
        for (int c = 0; c < C_; ++c) {
            double pc = std::exp(p[static_cast<std::size_t>(c)] - lse) - (c == y ? 1.0 : 0.0);
            double s = scale * pc;
            double* gc = g + static_cast<std::size_t>(c) * static_cast<std::size_t>(F_ + 1);
            for (int k = 0; k < F_; ++k) gc[k] += s * x[k];
            gc[F_] += s;
        }
        return l;
    }

    double loss(const std::vector<double>& w, const Dataset& d, std::size_t i) const override {
        thread_local std::vector<double> p;
        const double lse = logits(w, d.row(i), p);
        return lse - p[static_cast<std::size_t>(d.y[i])];
    }

    int predict(const std::vector<double>& w, const Dataset& d, std::size_t i) const override {
        thread_local std::vector<double> p;
        logits(w, d.row(i), p);
        return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }

private:
    // Fills z with the logits and returns log-sum-exp.
    double logits(const std::vector<double>& w, const double* x, std::vector<double>& z) const {
        z.assign(static_cast<std::size_t>(C_), 0.0);
        double m = -INFINITY;
        for (int c = 0; c < C_; ++c) {
            const double* wc = w.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(F_ + 1);
            double s = wc[F_];
            for (int k = 0; k < F_; ++k) s += wc[k] * x[k];
            z[static_cast<std::size_t>(c)] = s;
            m = std::max(m, s);
        }
        double e = 0.0;
        for (double s : z) e += std::exp(s - m);
        return m + std::log(e);
    }

    int C_, F_;
};

/// One tanh hidden layer followed by softmax. Layout: W1 (H x (F+1)) then W2 (C x (H+1)).
class TanhMlp final : public Model {
public:
    TanhMlp(int classes, int features, int hidden, std::uint64_t seed) : C_(classes), F_(features), H_(hidden), seed_(seed) {}

    std::size_t dim() const override {
        return static_cast<std::size_t>(H_) * static_cast<std::size_t>(F_ + 1) +
               static_cast<std::size_t>(C_) * static_cast<std::size_t>(H_ + 1);
    }

    std::vector<double> initial() const override {
        std::vector<double> w(dim());
        auto s = stream(seed_, 0, 0, "mlp-init");
        const double s1 = 1.0 / std::sqrt(static_cast<double>(F_ + 1));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(H_ + 1));
        const std::size_t n1 = static_cast<std::size_t>(H_) * static_cast<std::size_t>(F_ + 1);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = s.normal() * (i < n1 ? s1 : s2);
        return w;
    }

    double accumulate(const std::vector<double>& w, const Dataset& d, std::size_t i, double scale,
                      double* g) const override {
        thread_local std::vector<double> h, z;
        const double* x = d.row(i);
        const double lse = forward(w, x, h, z);
        const int y = d.y[i];
        const std::size_t n1 = static_cast<std::size_t>(H_) * static_cast<std::size_t>(F_ + 1);
        const double* W2 = w.data() + n1;
        double* g1 = g;
        double* g2 = g + n1;
        thread_local std::vector<double> dh;
        dh.assign(static_cast<std::size_t>(H_), 0.0);
        for (int c = 0; c < C_; ++c) {
            double dz = std::exp(z[static_cast<std::size_t>(c)] - lse) - (c == y ? 1.0 : 0.0);
            const double* w2c = W2 + static_cast<std::size_t>(c) * static_cast<std::size_t>(H_ + 1);
            double* g2c = g2 + static_cast<std::size_t>(c) * static_cast<std::size_t>(H_ + 1);
            for (int j = 0; j < H_; ++j) {
                g2c[j] += scale * dz * h[static_cast<std::size_t>(j)];
                dh[static_cast<std::size_t>(j)] += dz * w2c[j];
            }
            g2c[H_] += scale * dz;
        }
        for (int j = 0; j < H_; ++j) {
            double hj = h[static_cast<std::size_t>(j)];
            double da = dh[static_cast<std::size_t>(j)] * (1.0 - hj * hj) * scale;
            double* g1j = g1 + static_cast<std::size_t>(j) * static_cast<std::size_t>(F_ + 1);
            for (int k = 0; k < F_; ++k) g1j[k] += da * x[k];
            g1j[F_] += da;
        }
        return lse - z[static_cast<std::size_t>(y)];
    }

    double loss(const std::vector<double>& w, const Dataset& d, std::size_t i) const override {
        thread_local std::vector<double> h, z;
        const double lse = forward(w, d.row(i), h, z);
        return lse - z[static_cast<std::size_t>(d.y[i])];
    }

    int predict(const std::vector<double>& w, const Dataset& d, std::size_t i) const override {
        thread_local std::vector<double> h, z;
        forward(w, d.row(i), h, z);
        return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    }

private:
    double forward(const std::vector<double>& w, const double* x, std::vector<double>& h, std::vector<double>& z) const {
        h.assign(static_cast<std::size_t>(H_), 0.0);
        z.assign(static_cast<std::size_t>(C_), 0.0);
        for (int j = 0; j < H_; ++j) {
            const double* w1 = w.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(F_ + 1);
            double a = w1[F_];
            for (int k = 0; k < F_; ++k) a += w1[k] * x[k];
            h[static_cast<std::size_t>(j)] = std::tanh(a);
        }
        const double* W2 = w.data() + static_cast<std::size_t>(H_) * static_cast<std::size_t>(F_ + 1);
        double m = -INFINITY;
        for (int c = 0; c < C_; ++c) {
            const double* w2 = W2 + static_cast<std::size_t>(c) * static_cast<std::size_t>(H_ + 1);
            double s = w2[H_];
            for (int j = 0; j < H_; ++j) s += w2[j] * h[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(c)] = s;
            m = std::max(m, s);
        }
        double e = 0.0;
        for (double s : z) e += std::exp(s - m);
        return m + std::log(e);
    }

    int C_, F_, H_;
    std::uint64_t seed_;
};

/// f(w; x) = 0.5 ||w - x||^2. Used to check gradient and Lipschitz machinery.
class QuadraticModel final : public Model {
public:
    explicit QuadraticModel(int features) : F_(features) {}
    std::size_t dim() const override { return static_cast<std::size_t>(F_); }

    double accumulate(const std::vector<double>& w, const Dataset& d, std::size_t i, double scale,
                      double* g) const override {
        const double* x = d.row(i);
        double l = 0.0;
        for (int k = 0; k < F_; ++k) {
            double r = w[static_cast<std::size_t>(k)] - x[k];
            g[k] += scale * r;
            l += 0.5 * r * r;
        }
        return l;
    }

    double loss(const std::vector<double>& w, const Dataset& d, std::size_t i) const override {
        const double* x = d.row(i);
        double l = 0.0;
        for (int k = 0; k < F_; ++k) l += 0.5 * (w[static_cast<std::size_t>(k)] - x[k]) * (w[static_cast<std::size_t>(k)] - x[k]);
        return l;
    }

    int predict(const std::vector<double>&, const Dataset&, std::size_t) const override { return 0; }

private:
    int F_;
};

inline std::shared_ptr<const Model> make_model(const TaskSettings& t) {
    if (t.model == "mlp") return std::make_shared<TanhMlp>(t.classes, t.features, t.hidden, t.seed);
    return std::make_shared<SoftmaxRegression>(t.classes, t.features);
}

/// Mean gradient over the listed samples.
inline std::vector<double> batch_gradient(const Model& m, const std::vector<double>& w, const Dataset& d,
                                          const std::vector<std::size_t>& idx) {
    std::vector<double> g(m.dim(), 0.0);
    if (idx.empty()) return g;
    const double s = 1.0 / static_cast<double>(idx.size());
    for (auto i : idx) m.accumulate(w, d, i, s, g.data());
    return g;
}

inline std::vector<double> full_gradient(const Model& m, const std::vector<double>& w, const Dataset& d) {
    std::vector<double> g(m.dim(), 0.0);
    if (d.empty()) return g;
    const double s = 1.0 / static_cast<double>(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.accumulate(w, d, i, s, g.data());
    return g;
}

inline double mean_loss(const Model& m, const std::vector<double>& w, const Dataset& d) {
    if (d.empty()) return 0.0;
    CompensatedSum s;
    for (std::size_t i = 0; i < d.size(); ++i) s.add(m.loss(w, d, i));
    return s.value() / static_cast<double>(d.size());
}

inline double accuracy(const Model& m, const std::vector<double>& w, const Dataset& d) {
    if (d.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < d.size(); ++i) hit += (m.predict(w, d, i) == d.y[i]) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(d.size());
}

}  // namespace fedpq
