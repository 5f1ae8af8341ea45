#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "msdash/env.hpp"
#include "msdash/episode_log.hpp"
#include "msdash/policy.hpp"

namespace msdash {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,    ///< bad flags, unknown policy or scenario
    kExitConfig = 3,   ///< invalid configuration or empty trace pool
    kExitData = 4,     ///< unreadable or malformed input files
    kExitContract = 5, ///< a policy broke the masking contract
};

struct EpisodeResult {
    std::uint64_t episode = 0;
    EpisodeLog log;
    double step_reward_sum = 0.0;
    int decisions = 0;
};

/// Drives one episode with a built-in policy through the environment facade.
EpisodeResult run_policy_episode(StreamingEnv& env, Policy& policy, std::uint64_t episode_seed);

/// Episodes first_episode .. first_episode + count - 1, spread over `jobs` workers.
/// Results come back in episode order whatever the worker count.
std::vector<EpisodeResult> run_batch(const EnvConfig& cfg, const std::string& policy_spec, int count, int jobs = 1,
                                     std::uint64_t first_episode = 0);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0; ///< sample standard deviation, 0 for fewer than two values
};

MeanStd mean_std(std::span<const double> values);

struct RunSummary {
    std::string policy;
    int episodes = 0;
    MeanStd reward;
    MeanStd utility;
    MeanStd switch_penalty;
    MeanStd rebuffer_penalty;
    MeanStd rebuffer_s;
};

RunSummary summarize(const std::string& policy, std::span<const EpisodeResult> results);
nlohmann::ordered_json summary_json(const RunSummary& summary);
void print_summary_table(std::ostream& out, std::span<const RunSummary> rows);

struct TraceStats {
    std::string id;
    std::size_t samples = 0;
    double duration_s = 0.0;
    double mean_kbps = 0.0;
    double min_kbps = 0.0;
    double max_kbps = 0.0;
};

struct HistogramBin {
    double low = 0.0;
    double high = 0.0;
    int count = 0;
};

std::vector<TraceStats> trace_stats(std::span<const BandwidthTrace> traces);
/// Equal-width bins over [min mean, max mean]; a single bin when all means coincide.
std::vector<HistogramBin> mean_histogram(std::span<const TraceStats> stats, int bins);

/// Entry point shared by the executable and the tests. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace msdash
