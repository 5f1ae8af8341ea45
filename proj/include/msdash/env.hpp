#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "msdash/actions.hpp"
#include "msdash/engine.hpp"
#include "msdash/episode_log.hpp"
#include "msdash/media.hpp"
#include "msdash/trace.hpp"

namespace msdash {

/// Seeded random-walk pool used instead of (or in addition to) trace files.
struct SyntheticPoolSpec {
    int count = 20;
    double min_kbps = 100.0;
    double max_kbps = 2000.0;
    double step_kbps = 200.0;
    double duration_s = 600.0;
    double granularity_s = 1.0;
    std::uint64_t seed = 1;
};

struct PathPoolConfig {
    std::vector<std::filesystem::path> sources;
    TraceFormat format = TraceFormat::Canonical;
    AdapterConfig adapter;
    std::optional<SyntheticPoolSpec> synthetic;
    std::optional<std::pair<double, double>> mean_kbps; ///< keep traces with mean in [first, second]
};

enum class PoolSelection { Train, Test, All };

struct EnvConfig {
    std::optional<std::filesystem::path> manifest_path; ///< nominal manifest from `bitrates_kbps` when unset
    std::vector<double> bitrates_kbps = default_bitrates_kbps();
    double chunk_length_s = 4.0;
    int num_chunks = 60;
    double buffer_max_s = 30.0;
    int window = 0; ///< 0 = floor(buffer_max / chunk_length)
    double sample_s = 0.05;
    RewardConfig reward;
    RttSpec rtt;
    std::uint64_t seed = 1;
    ActionSpaceKind action_space = ActionSpaceKind::Rlas;
    bool normalize_observations = true;
    bool strict_actions = true;
    bool record_buffer_series = false;
    std::uint64_t split_seed = 42;
    double train_fraction = 0.8;
    PoolSelection pool = PoolSelection::Train;
    std::vector<PathPoolConfig> paths;

    int effective_window() const;
};

/// Two synthetic random-walk paths with means in [100, 2000] Kbps and the default parameters.
EnvConfig default_env_config();

/// Relative paths inside the document resolve against `base_dir`.
EnvConfig env_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
EnvConfig load_env_config(const std::filesystem::path& path);
nlohmann::json env_config_to_json(const EnvConfig& cfg);

/// Preset experiment grid: path 1 mean in [1500, 2000] Kbps, path 2 in a named band.
/// Names: "p2-1500-2000", "p2-1000-1500", "p2-500-1000", "p2-below-500".
std::vector<std::string> scenario_names();
/// Synthetic pools for both paths.
EnvConfig scenario_config(const std::string& name, EnvConfig base = default_env_config());
/// Mean-bandwidth filter bounds of a scenario, path by path.
std::vector<std::pair<double, double>> scenario_bands(const std::string& name);

struct PathPool {
    std::vector<TracePtr> train;
    std::vector<TracePtr> test;
};

/// Immutable data shared by every environment built from one config.
struct EnvAssets {
    std::shared_ptr<const VideoManifest> manifest;
    std::vector<PathPool> pools;
};

std::shared_ptr<const EnvAssets> build_assets(const EnvConfig& cfg);

struct EnvInfo {
    int path = -1;
    double time = 0.0;
    std::vector<double> raw_observation;
    bool substituted = false;
    std::optional<EpisodeBreakdown> episode;
    std::vector<std::string> trace_ids;
};

struct EnvStep {
    std::vector<double> observation;
    ActionMask mask;
    double reward = 0.0;
    bool done = false;
    EnvInfo info;
};

/// reset -> (observation, mask); step(action) -> (observation, mask, reward, done, info).
/// The reward of a step covers what happened between its request and the next request
/// (or the episode end).
class StreamingEnv {
public:
    explicit StreamingEnv(EnvConfig cfg);
    StreamingEnv(EnvConfig cfg, std::shared_ptr<const EnvAssets> assets);

    EnvStep reset(std::uint64_t episode_seed);
    /// Flat action in the configured action space.
    EnvStep step(int action);
    /// Engine-level request; always checked against the RLAS mask.
    EnvStep step_request(const ChunkRequest& request);

    const EnvConfig& config() const noexcept { return cfg_; }
    const EnvAssets& assets() const noexcept { return *assets_; }
    const SimEngine& engine() const noexcept { return engine_; }
    ActionSpace action_space() const;
    std::size_t observation_size() const;
    bool done() const noexcept { return engine_.done(); }
    int substitutions() const noexcept { return substitutions_; }

    /// Per-entry divisors: normalized = raw / scale. All ones when normalization is off.
    std::vector<double> observation_scales() const;

private:
    EnvStep snapshot(double reward, bool substituted);
    int substitute(int action) const;

    EnvConfig cfg_;
    std::shared_ptr<const EnvAssets> assets_;
    SimEngine engine_;
    bool active_ = false;
    int substitutions_ = 0;
};

} // namespace msdash
