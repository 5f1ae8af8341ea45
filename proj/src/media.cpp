#include "msdash/media.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "msdash/errors.hpp"

namespace msdash {

QualityLadder::QualityLadder(std::vector<double> bitrates_kbps) : bitrates_(std::move(bitrates_kbps)) {
    if (bitrates_.size() < 2) {
        throw ConfigError("quality ladder needs at least two levels");
    }
    for (std::size_t i = 0; i < bitrates_.size(); ++i) {
        if (!(bitrates_[i] > 0.0) || !std::isfinite(bitrates_[i])) {
            throw ConfigError("quality ladder bitrates must be positive and finite");
        }
        if (i > 0 && !(bitrates_[i] > bitrates_[i - 1])) {
            throw ConfigError("quality ladder bitrates must be strictly increasing");
        }
    }
    utilities_.reserve(bitrates_.size());
    for (double b : bitrates_) {
        utilities_.push_back(std::log(b / bitrates_.front()));
    }
    utilities_.front() = 0.0;
}

double QualityLadder::bitrate_kbps(int level) const {
    if (level < 0 || level >= size()) {
        throw UsageError("quality level " + std::to_string(level) + " outside [0, " + std::to_string(size()) + ")");
    }
    return bitrates_[static_cast<std::size_t>(level)];
}

double QualityLadder::utility(int level) const {
    if (level < 0 || level >= size()) {
        throw UsageError("quality level " + std::to_string(level) + " outside [0, " + std::to_string(size()) + ")");
    }
    return utilities_[static_cast<std::size_t>(level)];
}

double utility_of(const QualityLadder& ladder, int level) {
    return ladder.utility(level);
}

void RewardConfig::validate() const {
    if (!(beta >= 0.0) || !(gamma >= 0.0) || !(delta >= 0.0) || !(buffer_min_s >= 0.0)) {
        throw ConfigError("reward coefficients must be non-negative");
    }
}

VideoManifest::VideoManifest(double chunk_length_s, QualityLadder ladder,
                             std::vector<std::vector<double>> chunk_sizes_bytes)
    : chunk_length_(chunk_length_s), ladder_(std::move(ladder)),
      num_chunks_(static_cast<int>(chunk_sizes_bytes.size())) {
    if (!(chunk_length_ > 0.0)) {
        throw ConfigError("chunk length must be positive");
    }
    if (num_chunks_ < 1) {
        throw ConfigError("manifest has no chunks");
    }
    const auto levels = static_cast<std::size_t>(ladder_.size());
    sizes_.reserve(chunk_sizes_bytes.size() * levels);
    for (std::size_t c = 0; c < chunk_sizes_bytes.size(); ++c) {
        const auto& row = chunk_sizes_bytes[c];
        if (row.size() != levels) {
            throw ConfigError("chunk " + std::to_string(c + 1) + " has " + std::to_string(row.size()) +
                              " sizes, expected " + std::to_string(levels));
        }
        for (std::size_t l = 0; l < levels; ++l) {
            if (!(row[l] > 0.0)) {
                throw ConfigError("chunk " + std::to_string(c + 1) + " has a non-positive size");
            }
            if (l > 0 && row[l] < row[l - 1]) {
                throw ConfigError("chunk " + std::to_string(c + 1) + " sizes decrease with quality level");
            }
            sizes_.push_back(row[l]);
            max_bytes_ = std::max(max_bytes_, row[l]);
        }
    }
}

VideoManifest VideoManifest::nominal(QualityLadder ladder, double chunk_length_s, int num_chunks) {
    if (num_chunks < 1) {
        throw ConfigError("manifest has no chunks");
    }
    std::vector<double> row;
    for (double kbps : ladder.bitrates_kbps()) {
        row.push_back(kbps * 1000.0 * chunk_length_s / 8.0);
    }
    std::vector<std::vector<double>> sizes(static_cast<std::size_t>(num_chunks), row);
    return VideoManifest(chunk_length_s, std::move(ladder), std::move(sizes));
}

double VideoManifest::chunk_bytes(int index, int level) const {
    if (index < 1 || index > num_chunks_) {
        throw UsageError("chunk index " + std::to_string(index) + " outside [1, " + std::to_string(num_chunks_) + "]");
    }
    if (level < 0 || level >= num_levels()) {
        throw UsageError("quality level " + std::to_string(level) + " outside [0, " +
                         std::to_string(num_levels()) + ")");
    }
    return sizes_[static_cast<std::size_t>(index - 1) * static_cast<std::size_t>(num_levels()) +
                  static_cast<std::size_t>(level)];
}

VideoManifest VideoManifest::truncated(int n) const {
    if (n < 1 || n > num_chunks_) {
        throw ConfigError("cannot take " + std::to_string(n) + " chunks from a " + std::to_string(num_chunks_) +
                          "-chunk manifest");
    }
    const auto levels = static_cast<std::size_t>(num_levels());
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (std::size_t c = 0; c < static_cast<std::size_t>(n); ++c) {
        rows.emplace_back(sizes_.begin() + static_cast<std::ptrdiff_t>(c * levels),
                          sizes_.begin() + static_cast<std::ptrdiff_t>((c + 1) * levels));
    }
    return VideoManifest(chunk_length_, ladder_, std::move(rows));
}

VideoManifest manifest_from_json(const nlohmann::json& doc) {
    try {
        const double chunk_length = doc.at("chunk_length_s").get<double>();
        QualityLadder ladder(doc.at("bitrates_kbps").get<std::vector<double>>());
        if (doc.value("nominal", false)) {
            return VideoManifest::nominal(std::move(ladder), chunk_length, doc.at("num_chunks").get<int>());
        }
        return VideoManifest(chunk_length, std::move(ladder),
                             doc.at("chunk_sizes_bytes").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
}

VideoManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open manifest " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return manifest_from_json(doc);
}

nlohmann::json manifest_to_json(const VideoManifest& manifest) {
    nlohmann::json rows = nlohmann::json::array();
    for (int c = 1; c <= manifest.num_chunks(); ++c) {
        nlohmann::json row = nlohmann::json::array();
        for (int l = 0; l < manifest.num_levels(); ++l) {
            row.push_back(manifest.chunk_bytes(c, l));
        }
        rows.push_back(std::move(row));
    }
    const auto rates = manifest.ladder().bitrates_kbps();
    return {{"chunk_length_s", manifest.chunk_length_s()},
            {"bitrates_kbps", std::vector<double>(rates.begin(), rates.end())},
            {"chunk_sizes_bytes", std::move(rows)}};
}

double step_reward(std::span<const PlayedUtility> played, double rebuffer_seconds, const RewardConfig& cfg) {
    double utility = 0.0;
    double switches = 0.0;
    for (const auto& p : played) {
        utility += p.utility;
        switches += std::abs(p.utility - p.prev_utility);
    }
    return utility - cfg.beta * switches - cfg.gamma * rebuffer_seconds;
}

double single_source_reward(double utility, double prev_utility, double rebuffer_s, double buffer_after_s,
                            const RewardConfig& cfg) {
    const double shortfall = std::max(0.0, cfg.buffer_min_s - buffer_after_s);
    return utility - cfg.beta * std::abs(utility - prev_utility) - cfg.gamma * rebuffer_s -
           cfg.delta * shortfall * shortfall;
}

double single_source_rebuffer(double download_time_s, double buffer_level_s) {
    return std::max(0.0, download_time_s - buffer_level_s);
}

} // namespace msdash
