// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fedpq/fedpq.hpp"

namespace fedpq::testing {

/// Small configuration document shared by tests that need a full pipeline.
inline json small_config_json(int U = 6) {
    return json{
        {"devices", {{"count", U}, {"seed", 7}}},
        {"constants", {{"calibrate", true}, {"eta", 0.15}, {"batch", 16}}},
        {"task", {{"classes", 4}, {"features", 6}, {"train", 600}, {"test", 300}, {"pretrain", 200}, {"separation", 1.5}, {"seed", 99}}},
        {"experiment",
         {{"S", 3}, {"seeds", {1}}, {"round_cap", 40}, {"target_accuracy", 0.7}, {"epsilon", "auto"}, {"calibration_rounds", 5}}},
        {"optimizer", {{"r_max", 1}, {"budget_q", 4}, {"budget_delta", 4}, {"budget_rho", 4}, {"budget_bits", 4}, {"candidates", 64}, {"q_grid", 32}}}};
}

/// Hand-built federation over the quadratic loss, one dataset per device.
inline Federation quadratic_federation(const std::vector<Dataset>& data, double eta = 0.1, int batch = 4,
                                       std::uint64_t seed = 1) {
    Federation fed;
    fed.model = std::make_shared<QuadraticModel>(data.at(0).features);
    fed.seed = seed;
    fed.constants.eta = eta;
    fed.constants.b = batch;
    fed.local = data;
    fed.mixed = data;
    fed.pooled = Dataset(data[0].classes, data[0].features);
    double total = 0.0;
    for (const auto& d : data) total += static_cast<double>(d.size());
    for (std::size_t u = 0; u < data.size(); ++u) {
        DeviceProfile p;
        p.id = static_cast<int>(u);
        p.f = 3e7;
        p.d = 150;
        p.I = 1e-8;
        fed.devices.push_back(p);
        fed.tau.push_back(static_cast<double>(data[u].size()) / total);
        fed.plans.push_back(plan_augmentation(data[u].class_counts(), 0.0));
        for (std::size_t i = 0; i < data[u].size(); ++i) fed.pooled.append(data[u], i);
    }
    fed.test = data[0];
    return fed;
}

inline Dataset random_points(int n, int features, std::uint64_t seed, int classes = 1) {
    Dataset d(classes, features);
    auto s = stream(seed, 0, 0, "test-points");
    std::vector<double> x(static_cast<std::size_t>(features));
    for (int i = 0; i < n; ++i) {
        for (auto& v : x) v = s.normal();
        d.push(x.data(), static_cast<int>(s.index(static_cast<std::size_t>(classes))));
    }
    return d;
}

/// Deployment with fixed per-device q, unit power and a fixed rate.
inline Deployment fixed_deployment(const Federation& fed, const StrategyVector& s, double q, int S) {
    Deployment dep;
    dep.strategy = s;
    dep.S = S;
    for (std::size_t u = 0; u < fed.U(); ++u) dep.channel.push_back({static_cast<int>(u), 1e6, q, 0.1, true});
    dep.strategy.p.assign(fed.U(), 0.1);
    return dep;
}

inline StrategyVector plain_strategy(std::size_t U, int bits = 16) {
    StrategyVector s;
    s.q = 0.0;
    s.delta_aug.assign(U, 0.0);
    s.rho.assign(U, 0.0);
    s.bits.assign(U, bits);
    return s;
}

struct CommandResult {
    int status = 0;
    std::string output;
};

/// Runs a shell command, capturing stdout and stderr together.
inline CommandResult run_command(const std::string& cmd) {
    CommandResult r;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return {-1, "popen failed"};
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    const int st = pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fedpq_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fedpq::testing
