#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "msdash/actions.hpp"
#include "msdash/episode_log.hpp"
#include "msdash/media.hpp"
#include "msdash/random.hpp"
#include "msdash/trace.hpp"

namespace msdash {

inline constexpr int kHistoryLength = 6;

/// Per-request RTT, uniform in [min_s, max_s]. min_s == max_s gives a constant.
struct RttSpec {
    double min_s = 0.05;
    double max_s = 0.10;

    double sample(Rng& rng) const;
    void validate() const;
};

struct EngineConfig {
    double buffer_max_s = 30.0;
    int window = 0;           ///< 0 = floor(buffer_max / chunk_length)
    double sample_s = 0.05;   ///< PAUSE / REBUFFER polling period
    RewardConfig reward;
    RttSpec rtt;
    bool record_buffer_series = false;
};

enum class EventKind { Play, Rebuffer, Down, Pause };

struct SimEvent {
    double time = 0.0;
    EventKind kind = EventKind::Play;
    int path = -1; ///< set for Down and Pause only
    int rank = 0;
    std::uint64_t seq = 0;
};

struct PathSpec {
    TracePtr trace;
    double start_offset_s = 0.0; ///< episode time 0 maps to this trace time
};

struct ThroughputSample {
    double throughput_kbps;
    double download_time_s;
};

struct InFlight {
    int index;
    int level;
    double request_time;
    double finish_time;
    double bytes;
};

struct PathState {
    int id = 0;
    PathSpec spec;
    std::optional<InFlight> in_flight;
    std::deque<ThroughputSample> history; ///< most recent last, at most kHistoryLength
    bool retired = false;                 ///< nothing left to request
};

struct PlayedChunk {
    int index;
    int level;
};

struct StepOutcome {
    double reward = 0.0;
    std::vector<PlayedChunk> played;
    double rebuffer_s = 0.0;
    bool done = false;
};

/// Everything a decision rule may look at, gathered at a decision point.
struct Observation {
    std::vector<std::vector<double>> throughput_kbps; ///< per path, kHistoryLength slots, oldest first, zero-filled
    std::vector<std::vector<double>> download_time_s; ///< per path, same layout
    std::vector<double> next_chunk_bytes;             ///< W x L, chunks c_t+1..c_t+W, 0 past the end
    std::vector<double> next_chunk_levels;            ///< W entries, level+1 if downloaded else 0
    double buffer_s = 0.0;
    double remaining_chunks = 0.0;                    ///< N - c_t
    double playing_level = 0.0;                       ///< level+1 of chunk c_t, 0 before playback

    /// Fixed order: throughputs (P x 6), chunk sizes (W x L), next levels (W), buffer,
    /// remaining, playing level, download times (P x 6).
    std::vector<double> flatten() const;
};

std::size_t observation_size(int num_paths, int window, int levels) noexcept;

/// Discrete-event core. Chunk indices are 1-based; playing_index() == 0 before playback.
/// Events at equal timestamps run in the order PLAY, REBUFFER, DOWN(path 0..P-1), PAUSE,
/// then insertion order.
class SimEngine {
public:
    explicit SimEngine(EngineConfig config = {});

    /// Clears all state and schedules one DOWN decision point per path at t = 0.
    void reset(std::shared_ptr<const VideoManifest> manifest, std::vector<PathSpec> paths, std::uint64_t seed);

    /// Runs events until a path needs a request (returns its id) or playback of the
    /// last chunk ends (returns nullopt). Idempotent while a decision is pending.
    std::optional<int> advance();

    /// Issues the request on the pending path. Returns what was played and rebuffered
    /// since the previous request on any path. Throws ContractViolation when the path
    /// has no pending decision or the request is masked; state is then unchanged.
    StepOutcome apply_action(int path, const ChunkRequest& request);

    /// Residual after the last request. Only valid once done(); callable once.
    StepOutcome finish();

    /// Reward accumulated since the last request, without consuming it.
    double pending_reward() const;

    Observation observe(int path) const;
    ActionMask mask(ActionSpaceKind kind) const;
    ActionSpace action_space(ActionSpaceKind kind) const;

    bool done() const noexcept { return done_; }
    bool finished() const noexcept { return finished_; }
    std::optional<int> pending_path() const noexcept { return pending_; }
    double now() const noexcept { return now_; }
    int playing_index() const noexcept { return playing_; }
    int num_chunks() const noexcept { return manifest_ ? manifest_->num_chunks() : 0; }
    int num_paths() const noexcept { return static_cast<int>(paths_.size()); }
    int window() const noexcept { return window_; }
    double buffer_s() const noexcept;
    int buffered_chunks() const noexcept { return buffered_; }
    const ChunkSet& requested() const noexcept { return requested_; }
    const ChunkSet& downloaded() const noexcept { return downloaded_; }
    const PathState& path(int id) const { return paths_.at(static_cast<std::size_t>(id)); }
    const VideoManifest& manifest() const { return *manifest_; }
    const EngineConfig& config() const noexcept { return config_; }
    const EpisodeLog& log() const noexcept { return log_; }
    std::size_t events_processed() const noexcept { return events_processed_; }

private:
    struct Later {
        bool operator()(const SimEvent& a, const SimEvent& b) const noexcept;
    };

    void schedule(double time, EventKind kind, int path = -1);
    void process(const SimEvent& ev);
    void on_download_complete(PathState& p);
    void on_path_free(PathState& p);
    void on_play_due();
    void on_rebuffer_poll();
    void start_playing(int index);
    void record_buffer();
    void check_request(int path, const ChunkRequest& request) const;
    StepOutcome take_step(bool done);

    EngineConfig config_;
    std::shared_ptr<const VideoManifest> manifest_;
    int window_ = 0;
    std::vector<PathState> paths_;
    std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
    std::uint64_t next_seq_ = 0;
    Rng rng_;

    double now_ = 0.0;
    std::optional<int> pending_;
    bool done_ = false;
    bool finished_ = false;

    ChunkSet requested_;
    ChunkSet downloaded_;
    int buffered_ = 0;
    int playing_ = 0;
    bool started_ = false;

    // step accumulators, cleared at every request
    std::vector<PlayedUtility> step_played_utils_;
    std::vector<PlayedChunk> step_played_;
    long long step_stall_samples_ = 0;

    double total_reward_ = 0.0;
    double total_switch_ = 0.0;
    long long total_stall_samples_ = 0;
    std::size_t events_processed_ = 0;

    EpisodeLog log_;
};

} // namespace msdash
