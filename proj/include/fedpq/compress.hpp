// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fedpq/rng.hpp"

namespace fedpq {

struct PruneMask {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> pruned;
    double rho = 0.0;  // achieved ratio pruned/V
};

/// Number of pruned parameters, round-half-up of rho*V.
inline std::size_t pruned_count(double rho, std::size_t V) {
    return std::min(V, static_cast<std::size_t>(std::floor(rho * static_cast<double>(V) + 0.5)));
}

/// Zeroes the round(rho*V) smallest-magnitude entries; ties go to the lower index.
inline std::pair<std::vector<double>, PruneMask> prune(const std::vector<double>& w, double rho) {
    if (!(rho >= 0 && rho <= 1)) throw std::invalid_argument("prune: rho outside [0, 1]");
    const std::size_t V = w.size();
    const std::size_t n = pruned_count(rho, V);
    std::vector<std::size_t> order(V);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
        double ma = std::abs(w[a]), mb = std::abs(w[b]);
        return ma < mb || (ma == mb && a < b);
    };
    if (n > 0 && n < V) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), less);
    PruneMask mask;
    std::vector<std::uint8_t> gone(V, 0);
    for (std::size_t i = 0; i < n; ++i) gone[order[i]] = 1;
    std::vector<double> out = w;
    for (std::size_t v = 0; v < V; ++v) {
        if (gone[v]) {
            out[v] = 0.0;
            mask.pruned.push_back(v);
        } else {
            mask.kept.push_back(v);
        }
    }
    mask.rho = V ? static_cast<double>(n) / static_cast<double>(V) : 0.0;
    return {std::move(out), std::move(mask)};
}

struct QuantizedGradient {
    std::vector<std::uint32_t> levels;
    double lo = 0.0;
    double hi = 0.0;
    int bits = 1;
    std::uint64_t total_bits = 0;  // V*bits + o

    std::size_t size() const { return levels.size(); }
    std::uint32_t max_level() const { return static_cast<std::uint32_t>((std::uint64_t{1} << bits) - 1); }
};

/// Boundary points b_j = lo + j*(hi-lo)/(2^bits - 1); the top index maps to hi exactly.
struct LevelGrid {
    double lo, hi, step;
    std::uint32_t top;

    LevelGrid(double l, double h, std::uint32_t t) : lo(l), hi(h), step((h - l) / static_cast<double>(t)), top(t) {}

    double at(std::uint32_t j) const {
        if (j == 0) return lo;
        if (j == top) return hi;
        return lo + static_cast<double>(j) * step;
    }
};

/// Unbiased stochastic rounding onto 2^bits evenly spaced levels over [min g, max g].
inline QuantizedGradient quantize(const std::vector<double>& g, int bits, Stream& s, int o_bits = 64) {
    if (bits < 1 || bits > 31) throw std::invalid_argument("quantize: bits must be in [1, 31]");
    if (g.empty()) throw std::invalid_argument("quantize: empty gradient");
    QuantizedGradient q;
    q.bits = bits;
    q.total_bits = static_cast<std::uint64_t>(g.size()) * static_cast<std::uint64_t>(bits) + static_cast<std::uint64_t>(o_bits);
    auto [mn, mx] = std::minmax_element(g.begin(), g.end());
    q.lo = *mn;
    q.hi = *mx;
    q.levels.assign(g.size(), 0);
    if (!(q.hi > q.lo)) return q;
    const std::uint32_t top = q.max_level();
    const LevelGrid grid(q.lo, q.hi, top);
    const double inv_step = 1.0 / grid.step;
    const double top_below = static_cast<double>(top - 1);
    for (std::size_t v = 0; v < g.size(); ++v) {
        // g[v] >= lo, so truncation is floor
        const double pos = (g[v] - q.lo) * inv_step;
        const std::uint32_t j = pos >= top_below ? top - 1 : static_cast<std::uint32_t>(pos);
        const double bj = grid.at(j);
        const double up = j + 1 == top ? (g[v] - bj) / (q.hi - bj) : (g[v] - bj) * inv_step;
        std::uint32_t level = j;
        if (up >= 1.0)
            level = j + 1;
        else if (up > 0.0 && s.uniform() < up)
            level = j + 1;
        q.levels[v] = level;
    }
    return q;
}

inline std::vector<double> dequantize(const QuantizedGradient& q) {
    std::vector<double> out(q.levels.size());
    if (!(q.hi > q.lo)) {
        std::fill(out.begin(), out.end(), q.lo);
        return out;
    }
    const LevelGrid grid(q.lo, q.hi, q.max_level());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = grid.at(q.levels[v]);
    return out;
}

/// Upper bound on E||Q(g) - g||^2 with one shared range: V*(hi-lo)^2 / (4(2^bits-1)^2).
inline double quantization_error_bound(std::size_t V, double lo, double hi, int bits) {
    double top = std::ldexp(1.0, bits) - 1.0;
    return static_cast<double>(V) * (hi - lo) * (hi - lo) / (4.0 * top * top);
}

/// Serialized gradient. V and bits are framing known to both ends; the payload
/// holds the o-bit field (lo and hi as float32, zero padded) followed by the
/// packed level indices, LSB first, and is exactly V*bits + o bits long.
struct WirePacket {
    std::uint32_t V = 0;
    std::uint8_t bits = 0;
    std::uint32_t o_bits = 64;
    std::uint64_t payload_bits = 0;
    std::vector<std::uint8_t> payload;
};

namespace detail {

class BitWriter {
public:
    explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
    void put(std::uint64_t value, unsigned nbits) {
        for (unsigned i = 0; i < nbits; ++i) {
            if (pos_ % 8 == 0) out_.push_back(0);
            if ((value >> i) & 1U) out_.back() |= static_cast<std::uint8_t>(1U << (pos_ % 8));
            ++pos_;
        }
    }
    std::uint64_t bits_written() const { return pos_; }

private:
    std::vector<std::uint8_t>& out_;
    std::uint64_t pos_ = 0;
};

class BitReader {
public:
    explicit BitReader(const std::vector<std::uint8_t>& in) : in_(in) {}
    std::uint64_t get(unsigned nbits) {
        std::uint64_t v = 0;
        for (unsigned i = 0; i < nbits; ++i) {
            if (pos_ / 8 >= in_.size()) throw std::runtime_error("deserialize: payload truncated");
            if ((in_[pos_ / 8] >> (pos_ % 8)) & 1U) v |= (std::uint64_t{1} << i);
            ++pos_;
        }
        return v;
    }

private:
    const std::vector<std::uint8_t>& in_;
    std::uint64_t pos_ = 0;
};

}  // namespace detail

inline WirePacket serialize(const QuantizedGradient& q, std::uint32_t o_bits = 64) {
    if (o_bits < 64) throw std::invalid_argument("serialize: the o-field needs at least 64 bits for two float32 endpoints");
    WirePacket p;
    p.V = static_cast<std::uint32_t>(q.levels.size());
    p.bits = static_cast<std::uint8_t>(q.bits);
    p.o_bits = o_bits;
    detail::BitWriter w(p.payload);
    w.put(std::bit_cast<std::uint32_t>(static_cast<float>(q.lo)), 32);
    w.put(std::bit_cast<std::uint32_t>(static_cast<float>(q.hi)), 32);
    for (std::uint32_t i = 64; i < o_bits; ++i) w.put(0, 1);
    for (auto level : q.levels) w.put(level, static_cast<unsigned>(q.bits));
    p.payload_bits = w.bits_written();
    return p;
}

/// Inverse of serialize; endpoints come back at float32 precision.
inline QuantizedGradient deserialize(const WirePacket& p) {
    QuantizedGradient q;
    q.bits = p.bits;
    detail::BitReader r(p.payload);
    q.lo = std::bit_cast<float>(static_cast<std::uint32_t>(r.get(32)));
    q.hi = std::bit_cast<float>(static_cast<std::uint32_t>(r.get(32)));
    for (std::uint32_t i = 64; i < p.o_bits; ++i) r.get(1);
    q.levels.resize(p.V);
    for (auto& level : q.levels) level = static_cast<std::uint32_t>(r.get(p.bits));
    q.total_bits = static_cast<std::uint64_t>(p.V) * p.bits + p.o_bits;
    return q;
}

}  // namespace fedpq
