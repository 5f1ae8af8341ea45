#include "msdash/episode_log.hpp"

#include <algorithm>
#include <cmath>

namespace msdash {

EpisodeBreakdown recompute_breakdown(const EpisodeLog& log, const QualityLadder& ladder, const RewardConfig& reward) {
    EpisodeBreakdown out;
    double switches = 0.0;
    long long stalls = 0;
    double prev = 0.0;
    bool first = true;
    for (const auto& c : log.chunks) {
        if (c.play_time < 0.0) {
            continue;
        }
        const double q = ladder.utility(c.level);
        out.utility += q;
        if (!first) {
            switches += std::abs(q - prev);
        }
        prev = q;
        first = false;
        stalls += c.stall_samples;
    }
    out.rebuffer_s = static_cast<double>(stalls) * log.sample_s;
    out.switch_penalty = reward.beta * switches;
    out.rebuffer_penalty = reward.gamma * out.rebuffer_s;
    out.reward = out.utility - out.switch_penalty - out.rebuffer_penalty;
    if (!log.chunks.empty()) {
        out.startup_delay_s = std::max(0.0, log.chunks.front().play_time);
    }
    return out;
}

nlohmann::ordered_json chunk_record_json(const ChunkRecord& r) {
    return {{"type", "chunk"},
            {"index", r.index},
            {"level", r.level},
            {"path", r.path},
            {"request_time", r.request_time},
            {"finish_time", r.finish_time},
            {"play_time", r.play_time},
            {"rtt_s", r.rtt_s},
            {"stall_samples", r.stall_samples}};
}

nlohmann::ordered_json episode_record_json(const EpisodeLog& log) {
    const auto& b = log.breakdown;
    return {{"type", "episode"},
            {"seed", log.seed},
            {"trace_ids", log.trace_ids},
            {"trace_offsets_s", log.trace_offsets_s},
            {"complete", log.complete},
            {"reward", b.reward},
            {"utility", b.utility},
            {"switch_penalty", b.switch_penalty},
            {"rebuffer_penalty", b.rebuffer_penalty},
            {"rebuffer_s", b.rebuffer_s},
            {"startup_delay_s", b.startup_delay_s}};
}

void write_jsonl(std::ostream& out, const EpisodeLog& log) {
    for (const auto& c : log.chunks) {
        out << chunk_record_json(c).dump() << '\n';
    }
    out << episode_record_json(log).dump() << '\n';
}

} // namespace msdash
