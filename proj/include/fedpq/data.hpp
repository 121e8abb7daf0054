// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpq/config.hpp"
#include "fedpq/rng.hpp"

namespace fedpq {

/// Labelled samples stored row-major. Labels are 0-based class indices.
struct Dataset {
    int classes = 0;
    int features = 0;
    std::vector<double> X;
    std::vector<int> y;
    std::vector<std::uint8_t> generated;

    Dataset() = default;
    Dataset(int c, int f) : classes(c), features(f) {}

    std::size_t size() const { return y.size(); }
    bool empty() const { return y.empty(); }
    const double* row(std::size_t i) const { return X.data() + i * static_cast<std::size_t>(features); }

    void push(const double* x, int label, bool gen = false) {
        X.insert(X.end(), x, x + features);
        y.push_back(label);
        generated.push_back(gen ? 1 : 0);
    }

    void append(const Dataset& other, std::size_t i) { push(other.row(i), other.y[i], other.generated[i] != 0); }

    std::vector<long> class_counts() const {
        std::vector<long> n(static_cast<std::size_t>(classes), 0);
        for (int c : y) ++n[static_cast<std::size_t>(c)];
        return n;
    }

    std::vector<std::vector<std::size_t>> by_class() const {
        std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(classes));
        for (std::size_t i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(y[i])].push_back(i);
        return out;
    }

    std::size_t generated_count() const {
        return static_cast<std::size_t>(std::count(generated.begin(), generated.end(), std::uint8_t{1}));
    }

    /// Copy without generated samples.
    Dataset real_only() const {
        Dataset d(classes, features);
        for (std::size_t i = 0; i < size(); ++i)
            if (!generated[i]) d.append(*this, i);
        return d;
    }
};

using LocalDataset = Dataset;

struct Task {
    Dataset train, test, pretrain;
    std::vector<std::vector<double>> means;
};

/// Gaussian class clusters: random class means of norm `separation`, isotropic noise.
inline Task make_gaussian_task(const TaskSettings& t) {
    Task task;
    const auto C = static_cast<std::size_t>(t.classes);
    const auto F = static_cast<std::size_t>(t.features);
    auto ms = stream(t.seed, 0, 0, "task-means");
    task.means.assign(C, std::vector<double>(F));
    for (auto& m : task.means) {
        double n2 = 0.0;
        for (auto& x : m) {
            x = ms.normal();
            n2 += x * x;
        }
        double s = t.separation / std::sqrt(n2);
        for (auto& x : m) x *= s;
    }
    auto draw = [&](int n, const char* purpose) {
        Dataset d(t.classes, t.features);
        auto s = stream(t.seed, 0, 0, purpose);
        std::vector<double> x(F);
        for (int i = 0; i < n; ++i) {
            int c = static_cast<int>(s.index(C));
            for (std::size_t k = 0; k < F; ++k) x[k] = task.means[static_cast<std::size_t>(c)][k] + t.noise * s.normal();
            d.push(x.data(), c);
        }
        return d;
    };
    task.train = draw(t.train, "task-train");
    task.test = draw(t.test, "task-test");
    task.pretrain = draw(t.pretrain, "task-pretrain");
    return task;
}

/// Splits every class across U devices with proportions drawn from Dirichlet(pi).
inline std::vector<LocalDataset> partition_dirichlet(const Dataset& global, std::size_t U, double pi, Stream& s) {
    if (!(pi > 0)) throw std::invalid_argument("partition_dirichlet: pi must be > 0");
    if (U < 1) throw std::invalid_argument("partition_dirichlet: U must be >= 1");
    std::vector<LocalDataset> out(U, Dataset(global.classes, global.features));
    auto groups = global.by_class();
    for (auto& idx : groups) {
        s.shuffle(idx);
        auto p = s.dirichlet(pi, U);
        const std::size_t n = idx.size();
        std::size_t start = 0;
        double cum = 0.0;
        for (std::size_t u = 0; u < U; ++u) {
            cum += p[u];
            std::size_t end = (u + 1 == U) ? n : std::min(n, static_cast<std::size_t>(std::floor(cum * static_cast<double>(n))));
            end = std::max(end, start);
            for (std::size_t i = start; i < end; ++i) out[u].append(global, idx[i]);
            start = end;
        }
    }
    return out;
}

struct AugmentationPlan {
    std::vector<long> local;
    std::vector<long> gen;
    std::vector<long> mix;
    long target = 0;
    long total_gen = 0;
};

/// Per-class generation targets for augmentation factor delta.
///
/// The intermediate target is ceil(delta * max_c count - 1e-9).
inline AugmentationPlan plan_augmentation(const std::vector<long>& counts, double delta) {
    if (!(delta >= 0)) throw std::invalid_argument("plan_augmentation: delta must be >= 0");
    AugmentationPlan plan;
    plan.local = counts;
    plan.gen.assign(counts.size(), 0);
    plan.mix = counts;
    long dmax = 0;
    for (long c : counts) {
        if (c < 0) throw std::invalid_argument("plan_augmentation: negative count");
        dmax = std::max(dmax, c);
    }
    if (dmax == 0) return plan;
    plan.target = static_cast<long>(std::ceil(delta * static_cast<double>(dmax) - 1e-9));
    for (std::size_t c = 0; c < counts.size(); ++c) {
        plan.gen[c] = std::max(plan.target - counts[c], 0L);
        plan.mix[c] = counts[c] + plan.gen[c];
        plan.total_gen += plan.gen[c];
    }
    return plan;
}

/// Class-conditional sampler standing in for a pre-trained generative model.
///
/// A draw for class c is lambda*mu_c + (lambda*sd_c + (1-lambda)*s_iso) * z with
/// z standard normal per dimension, where mu_c, sd_c are the per-class mean and
/// per-dimension standard deviation of the reference data and s_iso is the
/// pooled standard deviation of all reference feature values.
class SurrogateGenerator {
public:
    SurrogateGenerator() = default;

    static SurrogateGenerator fit(const Dataset& ref, double lambda) {
        if (!(lambda >= 0 && lambda <= 1)) throw std::invalid_argument("fit_surrogate_generator: lambda outside [0, 1]");
        SurrogateGenerator g;
        g.lambda_ = lambda;
        g.features_ = ref.features;
        const auto C = static_cast<std::size_t>(ref.classes);
        const auto F = static_cast<std::size_t>(ref.features);
        auto groups = ref.by_class();
        g.mean_.assign(C, std::vector<double>(F, 0.0));
        g.sd_.assign(C, std::vector<double>(F, 0.0));
        for (std::size_t c = 0; c < C; ++c) {
            if (groups[c].empty())
                throw std::invalid_argument("fit_surrogate_generator: class " + std::to_string(c) +
                                            " absent from reference data");
            const double n = static_cast<double>(groups[c].size());
            for (auto i : groups[c])
                for (std::size_t k = 0; k < F; ++k) g.mean_[c][k] += ref.row(i)[k] / n;
            for (auto i : groups[c])
                for (std::size_t k = 0; k < F; ++k) {
                    double d = ref.row(i)[k] - g.mean_[c][k];
                    g.sd_[c][k] += d * d / n;
                }
            for (auto& v : g.sd_[c]) v = std::sqrt(v);
        }
        double m = 0.0, m2 = 0.0;
        const double N = static_cast<double>(ref.X.size());
        for (double x : ref.X) m += x / N;
        for (double x : ref.X) m2 += (x - m) * (x - m) / N;
        g.iso_ = std::sqrt(m2);
        return g;
    }

    int classes() const { return static_cast<int>(mean_.size()); }
    int features() const { return features_; }
    double lambda() const { return lambda_; }
    const std::vector<double>& mean(int c) const { return mean_.at(static_cast<std::size_t>(c)); }
    const std::vector<double>& stddev(int c) const { return sd_.at(static_cast<std::size_t>(c)); }
    double iso_scale() const { return iso_; }

    void sample(int c, Stream& s, double* out) const {
        if (c < 0 || c >= classes())
            throw std::out_of_range("surrogate generator: class " + std::to_string(c) + " outside [0, " +
                                    std::to_string(classes() - 1) + "]");
        const auto& mu = mean_[static_cast<std::size_t>(c)];
        const auto& sd = sd_[static_cast<std::size_t>(c)];
        for (std::size_t k = 0; k < mu.size(); ++k)
            out[k] = lambda_ * mu[k] + (lambda_ * sd[k] + (1.0 - lambda_) * iso_) * s.normal();
    }

    std::vector<double> sample(int c, Stream& s) const {
        std::vector<double> x(static_cast<std::size_t>(features_));
        sample(c, s, x.data());
        return x;
    }

private:
    double lambda_ = 1.0;
    int features_ = 0;
    double iso_ = 1.0;
    std::vector<std::vector<double>> mean_, sd_;
};

inline SurrogateGenerator fit_surrogate_generator(const Dataset& ref, double lambda) {
    return SurrogateGenerator::fit(ref, lambda);
}

/// Local samples followed by the generated ones, class by class.
inline LocalDataset execute_plan(const LocalDataset& local, const AugmentationPlan& plan, const SurrogateGenerator& gen,
                                 Stream& s) {
    LocalDataset mixed = local;
    std::vector<double> x(static_cast<std::size_t>(local.features));
    for (std::size_t c = 0; c < plan.gen.size(); ++c)
        for (long i = 0; i < plan.gen[c]; ++i) {
            gen.sample(static_cast<int>(c), s, x.data());
            mixed.push(x.data(), static_cast<int>(c), true);
        }
    return mixed;
}

/// Text table: one row per sample, "id,label,generated,x0,x1,...".
inline void write_table(const Dataset& d, std::ostream& os) {
    os.precision(17);
    for (std::size_t i = 0; i < d.size(); ++i) {
        os << i << ',' << d.y[i] << ',' << static_cast<int>(d.generated[i]);
        for (int k = 0; k < d.features; ++k) os << ',' << d.row(i)[k];
        os << '\n';
    }
}

inline Dataset read_table(std::istream& is, int classes) {
    Dataset d;
    d.classes = classes;
    std::string line;
    std::vector<double> x;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) throw std::runtime_error("read_table: row has fewer than 4 columns");
        int f = static_cast<int>(cells.size()) - 3;
        if (d.features == 0) d.features = f;
        if (f != d.features) throw std::runtime_error("read_table: inconsistent column count");
        int label = std::stoi(cells[1]);
        if (label < 0 || label >= classes) throw std::runtime_error("read_table: label out of range");
        x.resize(static_cast<std::size_t>(f));
        for (int k = 0; k < f; ++k) x[static_cast<std::size_t>(k)] = std::stod(cells[static_cast<std::size_t>(k) + 3]);
        d.push(x.data(), label, std::stoi(cells[2]) != 0);
    }
    return d;
}

}  // namespace fedpq
