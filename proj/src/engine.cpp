#include "msdash/engine.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

#include "msdash/errors.hpp"

namespace msdash {

double RttSpec::sample(Rng& rng) const {
    return uniform_real(rng, min_s, max_s);
}

void RttSpec::validate() const {
    if (!(min_s >= 0.0) || !(max_s >= min_s)) {
        throw ConfigError("rtt range must satisfy 0 <= min <= max");
    }
}

std::vector<double> Observation::flatten() const {
    std::vector<double> out;
    for (const auto& h : throughput_kbps) {
        out.insert(out.end(), h.begin(), h.end());
    }
    out.insert(out.end(), next_chunk_bytes.begin(), next_chunk_bytes.end());
    out.insert(out.end(), next_chunk_levels.begin(), next_chunk_levels.end());
    out.push_back(buffer_s);
    out.push_back(remaining_chunks);
    out.push_back(playing_level);
    for (const auto& h : download_time_s) {
        out.insert(out.end(), h.begin(), h.end());
    }
    return out;
}

std::size_t observation_size(int num_paths, int window, int levels) noexcept {
    const auto p = static_cast<std::size_t>(num_paths);
    const auto w = static_cast<std::size_t>(window);
    return 2 * p * kHistoryLength + w * static_cast<std::size_t>(levels) + w + 3;
}

bool SimEngine::Later::operator()(const SimEvent& a, const SimEvent& b) const noexcept {
    return std::tie(a.time, a.rank, a.seq) > std::tie(b.time, b.rank, b.seq);
}

SimEngine::SimEngine(EngineConfig config) : config_(std::move(config)) {}

void SimEngine::reset(std::shared_ptr<const VideoManifest> manifest, std::vector<PathSpec> paths,
                      std::uint64_t seed) {
    if (!manifest || manifest->num_chunks() < 1) {
        throw ConfigError("engine needs a non-empty manifest");
    }
    if (paths.empty()) {
        throw ConfigError("engine needs at least one path");
    }
    for (const auto& p : paths) {
        if (!p.trace) {
            throw ConfigError("path without a bandwidth trace");
        }
        if (!(p.start_offset_s >= 0.0)) {
            throw ConfigError("trace start offset must be non-negative");
        }
    }
    if (!(config_.buffer_max_s > 0.0) || !(config_.sample_s > 0.0)) {
        throw ConfigError("buffer maximum and sample period must be positive");
    }
    config_.rtt.validate();
    config_.reward.validate();

    manifest_ = std::move(manifest);
    window_ = config_.window > 0
                  ? config_.window
                  : static_cast<int>(std::floor(config_.buffer_max_s / manifest_->chunk_length_s() + 1e-9));
    if (window_ < 1) {
        throw ConfigError("buffer maximum is shorter than one chunk");
    }
    // A full buffer must not coexist with a missing next chunk, or every path pauses forever.
    if (static_cast<double>(window_ - 1) * manifest_->chunk_length_s() >= config_.buffer_max_s) {
        throw ConfigError("window of " + std::to_string(window_) + " chunks can fill the buffer around a gap");
    }

    const int n = manifest_->num_chunks();
    paths_.clear();
    for (std::size_t i = 0; i < paths.size(); ++i) {
        PathState st;
        st.id = static_cast<int>(i);
        st.spec = std::move(paths[i]);
        paths_.push_back(std::move(st));
    }
    queue_ = {};
    next_seq_ = 0;
    rng_ = make_rng({seed});
    now_ = 0.0;
    pending_.reset();
    done_ = false;
    finished_ = false;
    requested_ = ChunkSet(n);
    downloaded_ = ChunkSet(n);
    buffered_ = 0;
    playing_ = 0;
    started_ = false;
    step_played_utils_.clear();
    step_played_.clear();
    step_stall_samples_ = 0;
    total_reward_ = 0.0;
    total_switch_ = 0.0;
    total_stall_samples_ = 0;
    events_processed_ = 0;

    log_ = EpisodeLog{};
    log_.seed = seed;
    log_.sample_s = config_.sample_s;
    for (const auto& p : paths_) {
        log_.trace_ids.push_back(p.spec.trace->id());
        log_.trace_offsets_s.push_back(p.spec.start_offset_s);
    }
    log_.chunks.resize(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        log_.chunks[static_cast<std::size_t>(i - 1)].index = i;
    }
    record_buffer();

    for (const auto& p : paths_) {
        schedule(0.0, EventKind::Down, p.id);
    }
}

void SimEngine::schedule(double time, EventKind kind, int path) {
    SimEvent ev;
    ev.time = time;
    ev.kind = kind;
    ev.path = path;
    switch (kind) {
    case EventKind::Play: ev.rank = 0; break;
    case EventKind::Rebuffer: ev.rank = 1; break;
    case EventKind::Down: ev.rank = 2 + path; break;
    case EventKind::Pause: ev.rank = 2 + num_paths(); break;
    }
    ev.seq = next_seq_++;
    queue_.push(ev);
}

std::optional<int> SimEngine::advance() {
    if (!manifest_) {
        throw ContractViolation("advance called before reset");
    }
    while (!pending_ && !done_) {
        if (queue_.empty()) {
            throw std::logic_error("event queue drained before the episode ended");
        }
        const SimEvent ev = queue_.top();
        queue_.pop();
        now_ = ev.time;
        ++events_processed_;
        process(ev);
    }
    return pending_;
}

void SimEngine::process(const SimEvent& ev) {
    switch (ev.kind) {
    case EventKind::Down: {
        auto& p = paths_[static_cast<std::size_t>(ev.path)];
        if (p.in_flight) {
            on_download_complete(p);
        }
        on_path_free(p);
        break;
    }
    case EventKind::Pause: on_path_free(paths_[static_cast<std::size_t>(ev.path)]); break;
    case EventKind::Play: on_play_due(); break;
    case EventKind::Rebuffer: on_rebuffer_poll(); break;
    }
}

void SimEngine::on_download_complete(PathState& p) {
    const InFlight f = *p.in_flight;
    p.in_flight.reset();
    downloaded_.insert(f.index);
    ++buffered_;

    const double elapsed = f.finish_time - f.request_time;
    p.history.push_back({(8.0 * f.bytes / 1000.0) / elapsed, elapsed});
    while (p.history.size() > kHistoryLength) {
        p.history.pop_front();
    }
    log_.chunks[static_cast<std::size_t>(f.index - 1)].finish_time = now_;
    record_buffer();

    if (!started_ && f.index == 1) {
        start_playing(1);
    }
}

void SimEngine::on_path_free(PathState& p) {
    const int n = num_chunks();
    if (greedy_next_index(playing_, requested_, n, n) == 0) {
        p.retired = true;
        return;
    }
    if (buffer_s() >= config_.buffer_max_s || greedy_next_index(playing_, requested_, n, window_) == 0) {
        schedule(now_ + config_.sample_s, EventKind::Pause, p.id);
        return;
    }
    pending_ = p.id;
}

void SimEngine::on_play_due() {
    if (playing_ == num_chunks()) {
        done_ = true;
        log_.complete = true;
        return;
    }
    const int next = playing_ + 1;
    if (downloaded_.contains(next)) {
        start_playing(next);
    } else {
        schedule(now_ + config_.sample_s, EventKind::Rebuffer);
    }
}

void SimEngine::on_rebuffer_poll() {
    const int next = playing_ + 1;
    ++step_stall_samples_;
    ++total_stall_samples_;
    ++log_.chunks[static_cast<std::size_t>(next - 1)].stall_samples;
    if (downloaded_.contains(next)) {
        start_playing(next);
    } else {
        schedule(now_ + config_.sample_s, EventKind::Rebuffer);
    }
}

void SimEngine::start_playing(int index) {
    downloaded_.erase(index);
    --buffered_;
    auto& rec = log_.chunks[static_cast<std::size_t>(index - 1)];
    rec.play_time = now_;
    const auto& ladder = manifest_->ladder();
    const double q = ladder.utility(rec.level);
    const double prev = index == 1 ? q : ladder.utility(log_.chunks[static_cast<std::size_t>(index - 2)].level);
    step_played_utils_.push_back({q, prev});
    step_played_.push_back({index, rec.level});
    total_switch_ += std::abs(q - prev);
    log_.breakdown.utility += q;
    if (index == 1) {
        started_ = true;
        log_.breakdown.startup_delay_s = now_;
    }
    playing_ = index;
    schedule(now_ + manifest_->chunk_length_s(), EventKind::Play);
    record_buffer();
}

void SimEngine::record_buffer() {
    if (config_.record_buffer_series) {
        log_.buffer_series.push_back({now_, buffer_s()});
    }
}

double SimEngine::buffer_s() const noexcept {
    return manifest_ ? static_cast<double>(buffered_) * manifest_->chunk_length_s() : 0.0;
}

void SimEngine::check_request(int path, const ChunkRequest& request) const {
    if (!pending_ || *pending_ != path) {
        throw ContractViolation("path " + std::to_string(path) + " has no pending decision");
    }
    const int last = max_index_offset(window_, playing_, num_chunks());
    if (request.index_offset < 1 || request.index_offset > last) {
        throw ContractViolation("index offset " + std::to_string(request.index_offset) + " outside [1, " +
                                std::to_string(last) + "]");
    }
    const int index = playing_ + request.index_offset;
    if (requested_.contains(index)) {
        throw ContractViolation("chunk " + std::to_string(index) + " has already been requested");
    }
    if (request.level < 0 || request.level >= manifest_->num_levels()) {
        throw ContractViolation("quality level " + std::to_string(request.level) + " outside the ladder");
    }
}

StepOutcome SimEngine::apply_action(int path, const ChunkRequest& request) {
    check_request(path, request);
    StepOutcome out = take_step(false);

    auto& p = paths_[static_cast<std::size_t>(path)];
    const int index = playing_ + request.index_offset;
    const double rtt = config_.rtt.sample(rng_);
    const double bytes = manifest_->chunk_bytes(index, request.level);
    const double duration = p.spec.trace->download_duration(p.spec.start_offset_s + now_, bytes, rtt);
    p.in_flight = InFlight{index, request.level, now_, now_ + duration, bytes};
    requested_.insert(index);

    auto& rec = log_.chunks[static_cast<std::size_t>(index - 1)];
    rec.level = request.level;
    rec.path = path;
    rec.request_time = now_;
    rec.rtt_s = rtt;
    log_.request_order.push_back(index);

    schedule(now_ + duration, EventKind::Down, path);
    pending_.reset();
    return out;
}

StepOutcome SimEngine::take_step(bool done) {
    StepOutcome out;
    out.rebuffer_s = static_cast<double>(step_stall_samples_) * config_.sample_s;
    out.reward = step_reward(step_played_utils_, out.rebuffer_s, config_.reward);
    out.played = std::move(step_played_);
    out.done = done;
    total_reward_ += out.reward;
    step_played_utils_.clear();
    step_played_.clear();
    step_stall_samples_ = 0;
    return out;
}

StepOutcome SimEngine::finish() {
    if (!done_ || finished_) {
        throw ContractViolation(finished_ ? "episode already finished" : "episode has not ended");
    }
    StepOutcome out = take_step(true);
    finished_ = true;
    auto& b = log_.breakdown;
    b.rebuffer_s = static_cast<double>(total_stall_samples_) * config_.sample_s;
    b.switch_penalty = config_.reward.beta * total_switch_;
    b.rebuffer_penalty = config_.reward.gamma * b.rebuffer_s;
    b.reward = total_reward_;
    return out;
}

double SimEngine::pending_reward() const {
    return step_reward(step_played_utils_, static_cast<double>(step_stall_samples_) * config_.sample_s,
                       config_.reward);
}

Observation SimEngine::observe(int path) const {
    if (path < 0 || path >= num_paths()) {
        throw UsageError("no path " + std::to_string(path));
    }
    Observation obs;
    for (const auto& p : paths_) {
        std::vector<double> tput(kHistoryLength, 0.0);
        std::vector<double> dl(kHistoryLength, 0.0);
        const std::size_t skip = kHistoryLength - p.history.size();
        for (std::size_t i = 0; i < p.history.size(); ++i) {
            tput[skip + i] = p.history[i].throughput_kbps;
            dl[skip + i] = p.history[i].download_time_s;
        }
        obs.throughput_kbps.push_back(std::move(tput));
        obs.download_time_s.push_back(std::move(dl));
    }
    const int n = num_chunks();
    const int levels = manifest_->num_levels();
    for (int o = 1; o <= window_; ++o) {
        const int index = playing_ + o;
        for (int l = 0; l < levels; ++l) {
            obs.next_chunk_bytes.push_back(index <= n ? manifest_->chunk_bytes(index, l) : 0.0);
        }
        obs.next_chunk_levels.push_back(
            index <= n && downloaded_.contains(index) ? log_.chunks[static_cast<std::size_t>(index - 1)].level + 1.0
                                                      : 0.0);
    }
    obs.buffer_s = buffer_s();
    obs.remaining_chunks = static_cast<double>(n - playing_);
    obs.playing_level = playing_ > 0 ? log_.chunks[static_cast<std::size_t>(playing_ - 1)].level + 1.0 : 0.0;
    return obs;
}

ActionSpace SimEngine::action_space(ActionSpaceKind kind) const {
    return {kind, window_, manifest_ ? manifest_->num_levels() : 0};
}

ActionMask SimEngine::mask(ActionSpaceKind kind) const {
    return compute_mask(action_space(kind), playing_, requested_, num_chunks());
}

} // namespace msdash
