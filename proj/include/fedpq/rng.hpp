// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace fedpq {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Counter-based pseudorandom stream.
///
/// The i-th 64-bit draw is mix64(key + (i+1)*golden), so a stream is fully
/// determined by its key and position.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next_u64(); }

    std::uint64_t key() const { return key_; }
    std::uint64_t position() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ + counter_ * kGolden);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, n), Lemire's multiply-and-reject.
    std::uint64_t index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Stream::index: empty range");
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang, with the u^(1/a) boost for shape < 1.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("Stream::gamma: shape must be positive");
        if (shape < 1.0) {
            double u = 0.0;
            while (u <= 0.0) u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Gamma(shape, 1) by inversion. One uniform per draw, so draws at
    /// different shapes from the same stream position are monotonically coupled.
    double gamma_inverse(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("Stream::gamma_inverse: shape must be positive");
        double u = 0.0;
        while (u <= 0.0) u = uniform();
        return boost::math::gamma_p_inv(shape, u);
    }

    /// Symmetric Dirichlet(alpha) over n categories, from inverted gamma draws.
    std::vector<double> dirichlet(double alpha, std::size_t n) {
        std::vector<double> p(n);
        double s = 0.0;
        for (auto& x : p) {
            x = gamma_inverse(alpha);
            s += x;
        }
        if (s <= 0.0) {
            // every gamma draw underflowed; fall back to a single atom
            p.assign(n, 0.0);
            p[index(n)] = 1.0;
            return p;
        }
        for (auto& x : p) x /= s;
        return p;
    }

    /// Draw from a categorical distribution given non-negative weights.
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("Stream::categorical: weights sum to zero");
        double r = uniform() * total;
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            acc += weights[i];
            last = i;
            if (r < acc) return i;
        }
        return last;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream keyed on (seed, round, device, purpose).
inline Stream stream(std::uint64_t seed, std::int64_t round, std::int64_t device, std::string_view purpose) {
    std::uint64_t k = mix64(seed ^ 0x6A09E667F3BCC908ULL);
    k = mix64(k + static_cast<std::uint64_t>(round) * kGolden + 0x01);
    k = mix64(k + static_cast<std::uint64_t>(device) * kGolden + 0x02);
    k = mix64(k ^ fnv1a(purpose));
    return Stream(k);
}

/// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

template <class Range>
double compensated_sum(const Range& r) {
    CompensatedSum s;
    for (double x : r) s.add(x);
    return s.value();
}

}  // namespace fedpq
