#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace msdash {

/// The seven-level ladder used for the default experiments, in Kbps.
inline const std::vector<double>& default_bitrates_kbps() {
    static const std::vector<double> kLadder{300, 700, 1200, 1500, 3000, 6000, 8000};
    return kLadder;
}

/// Ordered set of nominal encodings. Utilities are ln(l_i / l_0), computed once.
class QualityLadder {
public:
    explicit QualityLadder(std::vector<double> bitrates_kbps);

    int size() const noexcept { return static_cast<int>(bitrates_.size()); }
    double bitrate_kbps(int level) const;
    double utility(int level) const;

    std::span<const double> bitrates_kbps() const noexcept { return bitrates_; }
    std::span<const double> utilities() const noexcept { return utilities_; }

private:
    std::vector<double> bitrates_;
    std::vector<double> utilities_;
};

/// ln(levels[level] / levels[0]). Throws UsageError outside [0, L).
double utility_of(const QualityLadder& ladder, int level);

struct RewardConfig {
    double beta = 1.0;         ///< quality-switch coefficient
    double gamma = 3.3;        ///< rebuffering coefficient, per second
    double delta = 0.0;        ///< low-buffer penalty coefficient (single-source reward only)
    double buffer_min_s = 0.0; ///< low-buffer threshold for the delta term

    void validate() const;
};

/// Chunk sizes for every (chunk, level) pair. Chunk indices are 1-based.
class VideoManifest {
public:
    VideoManifest(double chunk_length_s, QualityLadder ladder, std::vector<std::vector<double>> chunk_sizes_bytes);

    /// Sizes are bitrate * chunk_length: kbps * 1000 * seconds / 8 bytes.
    static VideoManifest nominal(QualityLadder ladder, double chunk_length_s, int num_chunks);

    double chunk_length_s() const noexcept { return chunk_length_; }
    int num_chunks() const noexcept { return num_chunks_; }
    int num_levels() const noexcept { return ladder_.size(); }
    const QualityLadder& ladder() const noexcept { return ladder_; }

    double chunk_bytes(int index, int level) const;
    double max_chunk_bytes() const noexcept { return max_bytes_; }

    /// First n chunks only; throws ConfigError if n exceeds num_chunks() or is < 1.
    VideoManifest truncated(int n) const;

private:
    double chunk_length_;
    QualityLadder ladder_;
    int num_chunks_;
    std::vector<double> sizes_; // row-major, num_chunks x num_levels
    double max_bytes_ = 0.0;
};

/// Parses a manifest document. Either an explicit table:
///   {"chunk_length_s": 4, "bitrates_kbps": [...], "chunk_sizes_bytes": [[...], ...]}
/// or a nominal manifest:
///   {"chunk_length_s": 4, "bitrates_kbps": [...], "nominal": true, "num_chunks": 60}
VideoManifest manifest_from_json(const nlohmann::json& doc);
VideoManifest load_manifest(const std::filesystem::path& path);
nlohmann::json manifest_to_json(const VideoManifest& manifest);

/// Utility of a played chunk and of the chunk played before it.
struct PlayedUtility {
    double utility;
    double prev_utility;
};

/// Sum(q_i) - beta * Sum|q_i - q_{i-1}| - gamma * rebuffer_seconds over one step.
double step_reward(std::span<const PlayedUtility> played, double rebuffer_seconds, const RewardConfig& cfg);

/// q_t - beta|q_t - q_{t-1}| - gamma * rebuffer - delta * max(0, B_min - B_t)^2.
double single_source_reward(double utility, double prev_utility, double rebuffer_s, double buffer_after_s,
                            const RewardConfig& cfg);

/// max(0, download_time - buffer_level).
double single_source_rebuffer(double download_time_s, double buffer_level_s);

} // namespace msdash
