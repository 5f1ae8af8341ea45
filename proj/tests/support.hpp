#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "msdash/engine.hpp"
#include "msdash/env.hpp"
#include "msdash/policy.hpp"

namespace msdash::testing {

inline std::shared_ptr<const VideoManifest> nominal_manifest(int num_chunks = 60, double chunk_length_s = 4.0) {
    return std::make_shared<const VideoManifest>(
        VideoManifest::nominal(QualityLadder(default_bitrates_kbps()), chunk_length_s, num_chunks));
}

inline TracePtr constant_trace(double kbps, double duration_s = 600.0, const std::string& id = "const") {
    return std::make_shared<const BandwidthTrace>(synth::constant(id, kbps, duration_s));
}

inline EngineConfig zero_rtt() {
    EngineConfig cfg;
    cfg.rtt = {0.0, 0.0};
    return cfg;
}

/// Plays an engine episode to the end with `policy`; returns the summed step rewards
/// including the terminal residual.
inline double drive(SimEngine& engine, Policy& policy) {
    double total = 0.0;
    while (auto path = engine.advance()) {
        total += engine.apply_action(*path, policy_decide(policy, engine, *path)).reward;
    }
    total += engine.finish().reward;
    return total;
}

/// Pool of random walks pinned to one value (min == max, zero step).
inline PathPoolConfig constant_pool(double kbps, int count = 4) {
    PathPoolConfig p;
    SyntheticPoolSpec s;
    s.count = count;
    s.min_kbps = kbps;
    s.max_kbps = kbps;
    s.step_kbps = 0.0;
    p.synthetic = s;
    return p;
}

inline PathPoolConfig walk_pool(double lo, double hi, std::uint64_t seed, int count = 10) {
    PathPoolConfig p;
    SyntheticPoolSpec s;
    s.count = count;
    s.min_kbps = lo;
    s.max_kbps = hi;
    s.step_kbps = 0.25 * (hi - lo);
    s.seed = seed;
    p.synthetic = s;
    return p;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("msdash-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

} // namespace msdash::testing
