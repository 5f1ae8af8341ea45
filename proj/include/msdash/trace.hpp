#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msdash/random.hpp"

namespace msdash {

struct TraceSample {
    double offset_s;
    double kbps;
};

/// Piecewise-constant throughput series for one path. Each sample holds until the
/// next offset; the last one holds for one granularity interval, so the replay
/// period is last_offset + granularity. Replay wraps around (circulation).
class BandwidthTrace {
public:
    /// Offsets are shifted to start at 0. granularity_s <= 0 means "infer from the
    /// first two offsets" (1 s for a single-sample trace).
    BandwidthTrace(std::string id, std::vector<TraceSample> samples, double granularity_s = 0.0);

    const std::string& id() const noexcept { return id_; }
    std::span<const TraceSample> samples() const noexcept { return samples_; }
    double granularity_s() const noexcept { return granularity_; }
    double duration_s() const noexcept { return duration_; }

    double mean_kbps() const noexcept { return mean_; }
    double min_kbps() const noexcept { return min_; }
    double max_kbps() const noexcept { return max_; }

    /// Bandwidth in effect at t (t >= 0), with t wrapped modulo duration_s().
    double bandwidth_at(double t) const;

    /// rtt + T, where T is the transfer time of 8*bytes/1000 Kbit starting at start+rtt.
    double download_duration(double start_s, double bytes, double rtt_s) const;

    /// Kbit delivered over [from, to] (circulated).
    double kbit_between(double from_s, double to_s) const;

private:
    std::size_t segment_at(double wrapped) const;
    double segment_end(std::size_t i) const;

    std::string id_;
    std::vector<TraceSample> samples_;
    double granularity_;
    double duration_;
    double mean_ = 0.0;
    double min_ = 0.0;
    double max_ = 0.0;
};

using TracePtr = std::shared_ptr<const BandwidthTrace>;

enum class TraceFormat { Canonical, Fcc, Lte };

TraceFormat parse_trace_format(const std::string& name);
std::string to_string(TraceFormat format);

/// Column mapping for vendor CSV files. Values are multiplied by value_scale to get Kbps.
struct AdapterConfig {
    std::string id_column;    ///< groups rows into traces; empty = one trace per file
    std::string time_column;  ///< numeric seconds; empty = row position * granularity
    std::string value_column;
    double value_scale = 1.0;
    double granularity_s = 1.0;
    double floor_kbps = 1.0;  ///< non-positive measurements are raised to this

    static AdapterConfig fcc_default();
    static AdapterConfig lte_default();
    static AdapterConfig defaults_for(TraceFormat format);
};

/// Loads one file, or every regular file of a directory (sorted by name).
/// Canonical files hold one trace: "offset_seconds,bandwidth_kbps" per line, '#' comments.
std::vector<BandwidthTrace> load_traces(const std::filesystem::path& path, TraceFormat format,
                                        const AdapterConfig& adapter);
std::vector<BandwidthTrace> load_traces(const std::filesystem::path& path, TraceFormat format = TraceFormat::Canonical);

/// Parses canonical text; `origin` is used in error messages.
BandwidthTrace parse_canonical_trace(const std::string& text, const std::string& id, const std::string& origin);

void write_canonical_trace(const BandwidthTrace& trace, const std::filesystem::path& path);

/// Traces with low <= mean <= high. Throws UsageError unless low < high.
std::vector<BandwidthTrace> filter_by_mean(std::span<const BandwidthTrace> traces, double low_kbps, double high_kbps);

struct TraceSet {
    std::vector<BandwidthTrace> traces;
    std::uint64_t split_seed = 42;
    double train_fraction = 0.8;
};

struct TraceSplit {
    std::vector<BandwidthTrace> train;
    std::vector<BandwidthTrace> test;
};

/// floor(train_fraction * n) traces go to train. The partition depends only on the
/// sorted trace ids, the seed and the fraction.
TraceSplit split(const TraceSet& set);

/// Uniform start offset in [0, duration).
double sample_episode_start(const BandwidthTrace& trace, Rng& rng);

namespace synth {

BandwidthTrace constant(std::string id, double kbps, double duration_s, double granularity_s = 1.0);

BandwidthTrace square_wave(std::string id, double high_kbps, double low_kbps, double half_period_s,
                           double duration_s, double granularity_s = 1.0);

/// Bounded random walk: each sample moves by a uniform step in [-step, step] and is
/// reflected back into [min, max]. The mean therefore lies in [min, max].
BandwidthTrace random_walk(std::string id, double min_kbps, double max_kbps, double step_kbps, double duration_s,
                           double granularity_s, Rng& rng);

/// `count` random walks with ids "<prefix>-<i>".
std::vector<BandwidthTrace> random_walk_pool(const std::string& prefix, int count, double min_kbps,
                                             double max_kbps, double step_kbps, double duration_s,
                                             double granularity_s, std::uint64_t seed);

} // namespace synth

} // namespace msdash
