#include "msdash/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include "msdash/bridge.hpp"
#include "msdash/errors.hpp"

namespace msdash {

using nlohmann::ordered_json;

EpisodeResult run_policy_episode(StreamingEnv& env, Policy& policy, std::uint64_t episode_seed) {
    EpisodeResult result;
    result.episode = episode_seed;
    policy.reset(episode_seed);
    EnvStep step = env.reset(episode_seed);
    while (!step.done) {
        const ChunkRequest request = policy_decide(policy, env.engine(), step.info.path);
        step = env.step_request(request);
        result.step_reward_sum += step.reward;
        ++result.decisions;
    }
    result.log = env.engine().log();
    return result;
}

std::vector<EpisodeResult> run_batch(const EnvConfig& cfg, const std::string& policy_spec, int count, int jobs,
                                     std::uint64_t first_episode) {
    if (count < 0) {
        throw UsageError("episode count must be non-negative");
    }
    const auto assets = build_assets(cfg);
    // fail fast on an unknown policy before any worker starts
    make_policy(policy_spec, cfg.seed);

    std::vector<EpisodeResult> results(static_cast<std::size_t>(count));
    const int workers = std::clamp(jobs, 1, std::max(count, 1));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto work = [&](int w) {
        try {
            StreamingEnv env(cfg, assets);
            auto policy = make_policy(policy_spec, cfg.seed);
            for (int i = w; i < count; i += workers) {
                results[static_cast<std::size_t>(i)] =
                    run_policy_episode(env, *policy, first_episode + static_cast<std::uint64_t>(i));
            }
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return results;
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) {
            sq += (v - out.mean) * (v - out.mean);
        }
        out.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return out;
}

RunSummary summarize(const std::string& policy, std::span<const EpisodeResult> results) {
    RunSummary s;
    s.policy = policy;
    s.episodes = static_cast<int>(results.size());
    std::vector<double> reward, utility, sw, rb, rbs;
    for (const auto& r : results) {
        const auto& b = r.log.breakdown;
        reward.push_back(b.reward);
        utility.push_back(b.utility);
        sw.push_back(b.switch_penalty);
        rb.push_back(b.rebuffer_penalty);
        rbs.push_back(b.rebuffer_s);
    }
    s.reward = mean_std(reward);
    s.utility = mean_std(utility);
    s.switch_penalty = mean_std(sw);
    s.rebuffer_penalty = mean_std(rb);
    s.rebuffer_s = mean_std(rbs);
    return s;
}

namespace {

ordered_json stat_json(const MeanStd& s) { return {{"mean", s.mean}, {"std", s.stddev}}; }

std::string pm(const MeanStd& s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << s.mean << " +- " << s.stddev;
    return os.str();
}

} // namespace

ordered_json summary_json(const RunSummary& s) {
    return {{"type", "summary"},
            {"policy", s.policy},
            {"episodes", s.episodes},
            {"reward", stat_json(s.reward)},
            {"utility", stat_json(s.utility)},
            {"switch_penalty", stat_json(s.switch_penalty)},
            {"rebuffer_penalty", stat_json(s.rebuffer_penalty)},
            {"rebuffer_s", stat_json(s.rebuffer_s)}};
}

void print_summary_table(std::ostream& out, std::span<const RunSummary> rows) {
    out << std::left << std::setw(14) << "policy" << std::setw(10) << "episodes" << std::setw(20) << "reward"
        << std::setw(20) << "utility" << std::setw(20) << "switch" << std::setw(20) << "rebuffer" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(14) << r.policy << std::setw(10) << r.episodes << std::setw(20) << pm(r.reward)
            << std::setw(20) << pm(r.utility) << std::setw(20) << pm(r.switch_penalty) << std::setw(20)
            << pm(r.rebuffer_penalty) << '\n';
    }
}

std::vector<TraceStats> trace_stats(std::span<const BandwidthTrace> traces) {
    std::vector<TraceStats> out;
    for (const auto& t : traces) {
        out.push_back({t.id(), t.samples().size(), t.duration_s(), t.mean_kbps(), t.min_kbps(), t.max_kbps()});
    }
    return out;
}

std::vector<HistogramBin> mean_histogram(std::span<const TraceStats> stats, int bins) {
    if (bins < 1) {
        throw UsageError("histogram needs at least one bin");
    }
    if (stats.empty()) {
        return {};
    }
    double lo = stats.front().mean_kbps;
    double hi = lo;
    for (const auto& s : stats) {
        lo = std::min(lo, s.mean_kbps);
        hi = std::max(hi, s.mean_kbps);
    }
    if (!(hi > lo)) {
        return {{lo, hi, static_cast<int>(stats.size())}};
    }
    std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
    const double width = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b) {
        out[static_cast<std::size_t>(b)].low = lo + b * width;
        out[static_cast<std::size_t>(b)].high = b + 1 == bins ? hi : lo + (b + 1) * width;
    }
    for (const auto& s : stats) {
        const int b = std::min(bins - 1, static_cast<int>((s.mean_kbps - lo) / width));
        ++out[static_cast<std::size_t>(b)].count;
    }
    return out;
}

namespace {

struct CommonOptions {
    std::string config;
    std::string scenario;
    std::vector<std::string> policies{"throughput"};
    int episodes = 10;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 1;
    std::string pool = "test";
};

EnvConfig resolve_config(const CommonOptions& o) {
    EnvConfig cfg = o.config.empty() ? default_env_config() : load_env_config(o.config);
    if (!o.scenario.empty()) {
        cfg = scenario_config(o.scenario, cfg);
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.pool == "train") {
        cfg.pool = PoolSelection::Train;
    } else if (o.pool == "test") {
        cfg.pool = PoolSelection::Test;
    } else {
        cfg.pool = PoolSelection::All;
    }
    return cfg;
}

std::ofstream open_out(const std::string& path) {
    if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ParseError(path, 0, "cannot open output file");
    }
    return f;
}

ordered_json header_record(const std::string& command, const EnvConfig& cfg) {
    ordered_json h = {{"type", "header"}, {"command", command}, {"format_version", 1}, {"seed", cfg.seed}};
    h["config"] = ordered_json::parse(env_config_to_json(cfg).dump());
    return h;
}

int cmd_run(const CommonOptions& o, std::ostream& out) {
    const EnvConfig cfg = resolve_config(o);
    std::ofstream file;
    if (!o.out.empty()) {
        file = open_out(o.out);
        ordered_json h = header_record("run", cfg);
        h["policies"] = o.policies;
        h["episodes"] = o.episodes;
        file << h.dump() << '\n';
    }
    std::vector<RunSummary> rows;
    for (const auto& spec : o.policies) {
        const auto results = run_batch(cfg, spec, o.episodes, o.jobs);
        if (file.is_open()) {
            for (const auto& r : results) {
                for (const auto& c : r.log.chunks) {
                    auto rec = chunk_record_json(c);
                    rec["policy"] = spec;
                    rec["episode"] = r.episode;
                    file << rec.dump() << '\n';
                }
                auto rec = episode_record_json(r.log);
                rec["policy"] = spec;
                rec["episode"] = r.episode;
                rec["step_reward_sum"] = r.step_reward_sum;
                rec["decisions"] = r.decisions;
                file << rec.dump() << '\n';
            }
        }
        rows.push_back(summarize(spec, results));
        if (file.is_open()) {
            file << summary_json(rows.back()).dump() << '\n';
        }
    }
    print_summary_table(out, rows);
    return kExitOk;
}

int cmd_timeline(const CommonOptions& o, std::uint64_t episode, std::ostream& out) {
    EnvConfig cfg = resolve_config(o);
    cfg.record_buffer_series = true;
    const std::string spec = o.policies.front();
    StreamingEnv env(cfg);
    auto policy = make_policy(spec, cfg.seed);
    const EpisodeResult r = run_policy_episode(env, *policy, episode);

    std::ofstream file;
    std::ostream* sink = &out;
    if (!o.out.empty()) {
        file = open_out(o.out);
        sink = &file;
    }
    ordered_json h = header_record("timeline", cfg);
    h["policy"] = spec;
    h["episode"] = episode;
    *sink << h.dump() << '\n';
    for (const auto& p : r.log.buffer_series) {
        *sink << ordered_json{{"type", "buffer"}, {"time", p.time}, {"buffer_s", p.buffer_s}}.dump() << '\n';
    }
    for (std::size_t k = 0; k < r.log.request_order.size(); ++k) {
        const auto& c = r.log.chunks[static_cast<std::size_t>(r.log.request_order[k] - 1)];
        *sink << ordered_json{{"type", "request"},    {"order", k + 1},         {"index", c.index},
                              {"level", c.level},     {"path", c.path},         {"request_time", c.request_time},
                              {"finish_time", c.finish_time}, {"play_time", c.play_time}}
                     .dump()
              << '\n';
    }
    *sink << episode_record_json(r.log).dump() << '\n';
    if (sink != &out) {
        out << "wrote " << r.log.buffer_series.size() << " buffer points and " << r.log.request_order.size()
            << " requests to " << o.out << '\n';
    }
    return kExitOk;
}

int cmd_inspect(const std::string& path, const std::string& format, int bins, std::ostream& out) {
    const TraceFormat fmt = parse_trace_format(format);
    const auto traces = load_traces(path, fmt);
    const auto stats = trace_stats(traces);
    out << std::left << std::setw(32) << "trace" << std::right << std::setw(9) << "samples" << std::setw(12)
        << "duration_s" << std::setw(12) << "mean_kbps" << std::setw(12) << "min_kbps" << std::setw(12)
        << "max_kbps" << '\n';
    out << std::fixed << std::setprecision(2);
    for (const auto& s : stats) {
        out << std::left << std::setw(32) << s.id << std::right << std::setw(9) << s.samples << std::setw(12)
            << s.duration_s << std::setw(12) << s.mean_kbps << std::setw(12) << s.min_kbps << std::setw(12)
            << s.max_kbps << '\n';
    }
    out << "\nmean bandwidth histogram\n";
    for (const auto& b : mean_histogram(stats, bins)) {
        out << "[" << b.low << ", " << b.high << "] " << b.count << '\n';
    }
    return kExitOk;
}

struct GenOptions {
    std::string out;
    std::string scenario;
    std::string prefix = "walk";
    int count = 50;
    double min_kbps = 100.0;
    double max_kbps = 2000.0;
    double step_kbps = 200.0;
    double duration_s = 600.0;
    double granularity_s = 1.0;
    std::uint64_t seed = 1;
};

int cmd_gen(const GenOptions& g, std::ostream& out) {
    if (g.out.empty()) {
        throw UsageError("gen-traces needs --out");
    }
    std::vector<std::pair<std::filesystem::path, std::vector<BandwidthTrace>>> groups;
    if (!g.scenario.empty()) {
        const auto bands = scenario_bands(g.scenario);
        for (std::size_t p = 0; p < bands.size(); ++p) {
            const double lo = bands[p].first;
            const double hi = bands[p].second;
            groups.emplace_back(std::filesystem::path(g.out) / ("path" + std::to_string(p + 1)),
                                synth::random_walk_pool("path" + std::to_string(p + 1), g.count, lo, hi,
                                                        0.25 * (hi - lo), g.duration_s, g.granularity_s,
                                                        g.seed + 17 * p));
        }
    } else {
        groups.emplace_back(g.out, synth::random_walk_pool(g.prefix, g.count, g.min_kbps, g.max_kbps, g.step_kbps,
                                                           g.duration_s, g.granularity_s, g.seed));
    }
    std::size_t written = 0;
    for (const auto& [dir, traces] : groups) {
        std::filesystem::create_directories(dir);
        for (const auto& t : traces) {
            write_canonical_trace(t, dir / (t.id() + ".txt"));
            ++written;
        }
    }
    out << "wrote " << written << " traces under " << g.out << '\n';
    return kExitOk;
}

int cmd_serve(const CommonOptions& o, const std::string& host, std::uint16_t port, std::size_t max_sessions,
              std::ostream& out) {
    EnvConfig cfg = resolve_config(o);
    bridge::Server server(cfg, host, port);
    out << "listening on " << host << ":" << server.port() << std::endl;
    server.serve(max_sessions);
    return kExitOk;
}

void add_env_options(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "environment config (JSON)");
    cmd->add_option("--scenario", o.scenario, "preset path bands")
        ->check(CLI::IsMember(scenario_names()));
    cmd->add_option("--seed", o.seed, "environment seed (overrides the config)");
    cmd->add_option("--pool", o.pool, "trace pool to sample from")->check(CLI::IsMember({"train", "test", "all"}));
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-source DASH streaming simulator"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    auto* run = app.add_subcommand("run", "evaluate policies over many episodes");
    add_env_options(run, run_opts);
    run->add_option("--policy", run_opts.policies, "throughput, bola, random, fixed:<level>, scripted:<file>")
        ->take_all();
    run->add_option("--episodes", run_opts.episodes, "episode count")->check(CLI::NonNegativeNumber);
    run->add_option("--out", run_opts.out, "JSONL output file");
    run->add_option("--jobs", run_opts.jobs, "worker threads")->check(CLI::PositiveNumber);

    CommonOptions tl_opts;
    std::uint64_t tl_episode = 0;
    auto* timeline = app.add_subcommand("timeline", "record one episode's buffer and request series");
    add_env_options(timeline, tl_opts);
    timeline->add_option("--policy", tl_opts.policies, "decision policy")->expected(1);
    timeline->add_option("--episode", tl_episode, "episode seed");
    timeline->add_option("--out", tl_opts.out, "JSONL output file (stdout when omitted)");

    std::string inspect_path;
    std::string inspect_format = "canonical";
    int inspect_bins = 10;
    auto* inspect = app.add_subcommand("inspect-trace", "summarize trace files");
    inspect->add_option("path", inspect_path, "trace file or directory")->required();
    inspect->add_option("--format", inspect_format, "canonical, fcc or lte");
    inspect->add_option("--bins", inspect_bins, "histogram bins")->check(CLI::PositiveNumber);

    GenOptions gen_opts;
    auto* gen = app.add_subcommand("gen-traces", "write synthetic random-walk traces");
    gen->add_option("--out", gen_opts.out, "output directory")->required();
    gen->add_option("--scenario", gen_opts.scenario, "write path1/ and path2/ pools for a preset")
        ->check(CLI::IsMember(scenario_names()));
    gen->add_option("--prefix", gen_opts.prefix);
    gen->add_option("--count", gen_opts.count)->check(CLI::PositiveNumber);
    gen->add_option("--min-kbps", gen_opts.min_kbps);
    gen->add_option("--max-kbps", gen_opts.max_kbps);
    gen->add_option("--step-kbps", gen_opts.step_kbps);
    gen->add_option("--duration", gen_opts.duration_s);
    gen->add_option("--granularity", gen_opts.granularity_s);
    gen->add_option("--seed", gen_opts.seed);

    CommonOptions serve_opts;
    serve_opts.pool = "train";
    std::string host = "127.0.0.1";
    std::uint16_t port = 5555;
    std::size_t max_sessions = 0;
    auto* serve = app.add_subcommand("serve-bridge", "serve the environment over the framed JSON protocol");
    add_env_options(serve, serve_opts);
    serve->add_option("--host", host);
    serve->add_option("--port", port, "0 picks a free port");
    serve->add_option("--max-sessions", max_sessions, "exit after this many sessions (0 = never)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*run) {
            return cmd_run(run_opts, out);
        }
        if (*timeline) {
            return cmd_timeline(tl_opts, tl_episode, out);
        }
        if (*inspect) {
            return cmd_inspect(inspect_path, inspect_format, inspect_bins, out);
        }
        if (*gen) {
            return cmd_gen(gen_opts, out);
        }
        if (*serve) {
            return cmd_serve(serve_opts, host, port, max_sessions, out);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "input error: " << e.what() << '\n';
        return kExitData;
    } catch (const ContractViolation& e) {
        err << "contract violation: " << e.what() << '\n';
        return kExitContract;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitUsage;
}

} // namespace msdash
