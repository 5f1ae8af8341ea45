#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "msdash/media.hpp"

namespace msdash {

/// One chunk's life: request, arrival, playback. Times are episode seconds; -1 = never.
struct ChunkRecord {
    int index = 0;
    int level = -1;
    int path = -1;
    double request_time = -1.0;
    double finish_time = -1.0;
    double play_time = -1.0;
    double rtt_s = 0.0;
    int stall_samples = 0; ///< rebuffer polls spent waiting for this chunk after playback started
};

struct BufferPoint {
    double time;
    double buffer_s;
};

/// QoE decomposition: reward = utility - switch_penalty - rebuffer_penalty.
struct EpisodeBreakdown {
    double reward = 0.0;
    double utility = 0.0;
    double switch_penalty = 0.0;   ///< beta * sum |q_i - q_{i-1}|
    double rebuffer_penalty = 0.0; ///< gamma * rebuffer_s
    double rebuffer_s = 0.0;
    double startup_delay_s = 0.0;
};

struct EpisodeLog {
    std::uint64_t seed = 0;
    std::vector<std::string> trace_ids;
    std::vector<double> trace_offsets_s;
    double sample_s = 0.05;
    std::vector<ChunkRecord> chunks;  ///< chunks[i - 1] describes chunk i
    std::vector<int> request_order;   ///< chunk indices in the order they were requested
    std::vector<BufferPoint> buffer_series;
    EpisodeBreakdown breakdown;       ///< as accumulated by the engine
    bool complete = false;
};

/// Rebuilds the decomposition from per-chunk records alone (levels, play order, stalls).
EpisodeBreakdown recompute_breakdown(const EpisodeLog& log, const QualityLadder& ladder, const RewardConfig& reward);

nlohmann::ordered_json chunk_record_json(const ChunkRecord& record);
nlohmann::ordered_json episode_record_json(const EpisodeLog& log);

/// Line-delimited records: one {"type":"chunk"} per chunk in index order, then one {"type":"episode"}.
void write_jsonl(std::ostream& out, const EpisodeLog& log);

} // namespace msdash
