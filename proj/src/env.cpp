#include "msdash/env.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "msdash/errors.hpp"

namespace msdash {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

PoolSelection parse_pool(const std::string& name) {
    if (name == "train") {
        return PoolSelection::Train;
    }
    if (name == "test") {
        return PoolSelection::Test;
    }
    if (name == "all") {
        return PoolSelection::All;
    }
    throw ConfigError("split.use must be train, test or all (got '" + name + "')");
}

std::string to_string(PoolSelection pool) {
    switch (pool) {
    case PoolSelection::Train: return "train";
    case PoolSelection::Test: return "test";
    case PoolSelection::All: return "all";
    }
    return "train";
}

SyntheticPoolSpec synthetic_from_json(const json& j) {
    SyntheticPoolSpec s;
    s.count = j.value("count", s.count);
    s.min_kbps = j.value("min_kbps", s.min_kbps);
    s.max_kbps = j.value("max_kbps", s.max_kbps);
    s.step_kbps = j.value("step_kbps", s.step_kbps);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.granularity_s = j.value("granularity_s", s.granularity_s);
    s.seed = j.value("seed", s.seed);
    return s;
}

json synthetic_to_json(const SyntheticPoolSpec& s) {
    return {{"count", s.count},           {"min_kbps", s.min_kbps},
            {"max_kbps", s.max_kbps},     {"step_kbps", s.step_kbps},
            {"duration_s", s.duration_s}, {"granularity_s", s.granularity_s},
            {"seed", s.seed}};
}

SyntheticPoolSpec band_pool(double lo, double hi, std::uint64_t seed) {
    SyntheticPoolSpec s;
    s.count = 50;
    s.min_kbps = lo;
    s.max_kbps = hi;
    s.step_kbps = 0.25 * (hi - lo);
    s.duration_s = 600.0;
    s.granularity_s = 1.0;
    s.seed = seed;
    return s;
}

} // namespace

int EnvConfig::effective_window() const {
    return window > 0 ? window : static_cast<int>(std::floor(buffer_max_s / chunk_length_s + 1e-9));
}

EnvConfig default_env_config() {
    EnvConfig cfg;
    for (std::uint64_t p = 0; p < 2; ++p) {
        PathPoolConfig path;
        path.synthetic = band_pool(100.0, 2000.0, 101 + p);
        cfg.paths.push_back(std::move(path));
    }
    return cfg;
}

EnvConfig env_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    EnvConfig cfg;
    try {
        if (doc.contains("manifest")) {
            const auto& m = doc.at("manifest");
            if (m.is_string()) {
                cfg.manifest_path = resolve(base_dir, m.get<std::string>());
            } else {
                if (m.contains("path")) {
                    cfg.manifest_path = resolve(base_dir, m.at("path").get<std::string>());
                }
                cfg.bitrates_kbps = m.value("bitrates_kbps", cfg.bitrates_kbps);
                cfg.chunk_length_s = m.value("chunk_length_s", cfg.chunk_length_s);
            }
        }
        cfg.num_chunks = doc.value("num_chunks", cfg.num_chunks);
        cfg.buffer_max_s = doc.value("buffer_max_s", cfg.buffer_max_s);
        cfg.window = doc.value("window", cfg.window);
        cfg.sample_s = doc.value("sample_s", cfg.sample_s);
        if (doc.contains("reward")) {
            const auto& r = doc.at("reward");
            cfg.reward.beta = r.value("beta", cfg.reward.beta);
            cfg.reward.gamma = r.value("gamma", cfg.reward.gamma);
            cfg.reward.delta = r.value("delta", cfg.reward.delta);
            cfg.reward.buffer_min_s = r.value("buffer_min_s", cfg.reward.buffer_min_s);
        }
        if (doc.contains("rtt_ms")) {
            const auto rtt = doc.at("rtt_ms").get<std::vector<double>>();
            if (rtt.size() != 2) {
                throw ConfigError("rtt_ms must be [min, max]");
            }
            cfg.rtt = {rtt[0] / 1000.0, rtt[1] / 1000.0};
        }
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.action_space = parse_action_space(doc.value("action_space", std::string("rlas")));
        cfg.normalize_observations = doc.value("normalize_observations", cfg.normalize_observations);
        cfg.strict_actions = doc.value("strict_actions", cfg.strict_actions);
        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            cfg.split_seed = s.value("seed", cfg.split_seed);
            cfg.train_fraction = s.value("train_fraction", cfg.train_fraction);
            cfg.pool = parse_pool(s.value("use", std::string("train")));
        }
        for (const auto& p : doc.at("paths")) {
            PathPoolConfig path;
            path.format = parse_trace_format(p.value("format", std::string("canonical")));
            path.adapter = AdapterConfig::defaults_for(path.format);
            if (p.contains("adapter")) {
                const auto& a = p.at("adapter");
                path.adapter.id_column = a.value("id_column", path.adapter.id_column);
                path.adapter.time_column = a.value("time_column", path.adapter.time_column);
                path.adapter.value_column = a.value("value_column", path.adapter.value_column);
                path.adapter.value_scale = a.value("value_scale", path.adapter.value_scale);
                path.adapter.granularity_s = a.value("granularity_s", path.adapter.granularity_s);
                path.adapter.floor_kbps = a.value("floor_kbps", path.adapter.floor_kbps);
            }
            for (const auto& src : p.value("sources", std::vector<std::string>{})) {
                path.sources.push_back(resolve(base_dir, src));
            }
            if (p.contains("synthetic")) {
                path.synthetic = synthetic_from_json(p.at("synthetic"));
            }
            if (p.contains("mean_kbps")) {
                const auto band = p.at("mean_kbps").get<std::vector<double>>();
                if (band.size() != 2) {
                    throw ConfigError("mean_kbps must be [low, high]");
                }
                path.mean_kbps = std::make_pair(band[0], band[1]);
            }
            cfg.paths.push_back(std::move(path));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("env config: ") + e.what());
    } catch (const UsageError& e) {
        throw ConfigError(std::string("env config: ") + e.what());
    }
    return cfg;
}

EnvConfig load_env_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return env_config_from_json(doc, path.parent_path());
}

json env_config_to_json(const EnvConfig& cfg) {
    json manifest = {{"bitrates_kbps", cfg.bitrates_kbps}, {"chunk_length_s", cfg.chunk_length_s}};
    if (cfg.manifest_path) {
        manifest["path"] = cfg.manifest_path->string();
    }
    json paths = json::array();
    for (const auto& p : cfg.paths) {
        json jp = {{"format", to_string(p.format)},
                   {"adapter",
                    {{"id_column", p.adapter.id_column},
                     {"time_column", p.adapter.time_column},
                     {"value_column", p.adapter.value_column},
                     {"value_scale", p.adapter.value_scale},
                     {"granularity_s", p.adapter.granularity_s},
                     {"floor_kbps", p.adapter.floor_kbps}}}};
        json sources = json::array();
        for (const auto& s : p.sources) {
            sources.push_back(s.string());
        }
        jp["sources"] = std::move(sources);
        if (p.synthetic) {
            jp["synthetic"] = synthetic_to_json(*p.synthetic);
        }
        if (p.mean_kbps) {
            jp["mean_kbps"] = {p.mean_kbps->first, p.mean_kbps->second};
        }
        paths.push_back(std::move(jp));
    }
    return {{"manifest", std::move(manifest)},
            {"num_chunks", cfg.num_chunks},
            {"buffer_max_s", cfg.buffer_max_s},
            {"window", cfg.window},
            {"sample_s", cfg.sample_s},
            {"reward",
             {{"beta", cfg.reward.beta},
              {"gamma", cfg.reward.gamma},
              {"delta", cfg.reward.delta},
              {"buffer_min_s", cfg.reward.buffer_min_s}}},
            {"rtt_ms", {cfg.rtt.min_s * 1000.0, cfg.rtt.max_s * 1000.0}},
            {"seed", cfg.seed},
            {"action_space", to_string(cfg.action_space)},
            {"normalize_observations", cfg.normalize_observations},
            {"strict_actions", cfg.strict_actions},
            {"split", {{"seed", cfg.split_seed}, {"train_fraction", cfg.train_fraction}, {"use", to_string(cfg.pool)}}},
            {"paths", std::move(paths)}};
}

std::vector<std::string> scenario_names() {
    return {"p2-1500-2000", "p2-1000-1500", "p2-500-1000", "p2-below-500"};
}

std::vector<std::pair<double, double>> scenario_bands(const std::string& name) {
    const std::pair<double, double> first{1500.0, 2000.0};
    if (name == "p2-1500-2000") {
        return {first, {1500.0, 2000.0}};
    }
    if (name == "p2-1000-1500") {
        return {first, {1000.0, 1500.0}};
    }
    if (name == "p2-500-1000") {
        return {first, {500.0, 1000.0}};
    }
    if (name == "p2-below-500") {
        // traces below 100 Kbps mean are excluded from the datasets as a whole
        return {first, {100.0, 500.0}};
    }
    throw UsageError("unknown scenario '" + name + "'");
}

EnvConfig scenario_config(const std::string& name, EnvConfig base) {
    const auto bands = scenario_bands(name);
    base.paths.clear();
    for (std::size_t p = 0; p < bands.size(); ++p) {
        PathPoolConfig path;
        path.synthetic = band_pool(bands[p].first, bands[p].second, 1000 + 17 * p);
        path.mean_kbps = bands[p];
        base.paths.push_back(std::move(path));
    }
    return base;
}

std::shared_ptr<const EnvAssets> build_assets(const EnvConfig& cfg) {
    if (cfg.paths.empty()) {
        throw ConfigError("env config has no paths");
    }
    if (cfg.num_chunks < 1) {
        throw ConfigError("num_chunks must be at least 1");
    }
    auto assets = std::make_shared<EnvAssets>();
    VideoManifest full = cfg.manifest_path
                             ? load_manifest(*cfg.manifest_path)
                             : VideoManifest::nominal(QualityLadder(cfg.bitrates_kbps), cfg.chunk_length_s,
                                                      cfg.num_chunks);
    assets->manifest = std::make_shared<const VideoManifest>(full.truncated(cfg.num_chunks));

    for (std::size_t p = 0; p < cfg.paths.size(); ++p) {
        const auto& pc = cfg.paths[p];
        std::vector<BandwidthTrace> traces;
        for (const auto& src : pc.sources) {
            auto loaded = load_traces(src, pc.format, pc.adapter);
            std::move(loaded.begin(), loaded.end(), std::back_inserter(traces));
        }
        if (pc.synthetic) {
            const auto& s = *pc.synthetic;
            auto pool = synth::random_walk_pool("synth-p" + std::to_string(p), s.count, s.min_kbps, s.max_kbps,
                                                s.step_kbps, s.duration_s, s.granularity_s, s.seed);
            std::move(pool.begin(), pool.end(), std::back_inserter(traces));
        }
        if (pc.mean_kbps) {
            traces = filter_by_mean(traces, pc.mean_kbps->first, pc.mean_kbps->second);
        }
        if (traces.empty()) {
            throw ConfigError("path " + std::to_string(p) + " has no traces after filtering");
        }
        PathPool pool;
        auto share = [](std::vector<BandwidthTrace> v) {
            std::vector<TracePtr> out;
            for (auto& t : v) {
                out.push_back(std::make_shared<const BandwidthTrace>(std::move(t)));
            }
            return out;
        };
        if (traces.size() < 2) {
            pool.train = share(traces);
            pool.test = pool.train;
        } else {
            TraceSplit parts = split(TraceSet{std::move(traces), cfg.split_seed + p, cfg.train_fraction});
            pool.train = share(std::move(parts.train));
            pool.test = share(std::move(parts.test));
            if (pool.test.empty()) {
                pool.test = pool.train;
            }
        }
        assets->pools.push_back(std::move(pool));
    }
    return assets;
}

namespace {
EngineConfig engine_config(const EnvConfig& cfg) {
    EngineConfig ec;
    ec.buffer_max_s = cfg.buffer_max_s;
    ec.window = cfg.window;
    ec.sample_s = cfg.sample_s;
    ec.reward = cfg.reward;
    ec.rtt = cfg.rtt;
    ec.record_buffer_series = cfg.record_buffer_series;
    return ec;
}
} // namespace

StreamingEnv::StreamingEnv(EnvConfig cfg) : StreamingEnv(cfg, build_assets(cfg)) {}

StreamingEnv::StreamingEnv(EnvConfig cfg, std::shared_ptr<const EnvAssets> assets)
    : cfg_(std::move(cfg)), assets_(std::move(assets)), engine_(engine_config(cfg_)) {
    if (!assets_ || assets_->pools.size() != cfg_.paths.size()) {
        throw ConfigError("environment assets do not match the config");
    }
}

ActionSpace StreamingEnv::action_space() const {
    return {cfg_.action_space, cfg_.effective_window(), assets_->manifest->num_levels()};
}

std::size_t StreamingEnv::observation_size() const {
    return msdash::observation_size(static_cast<int>(assets_->pools.size()), cfg_.effective_window(),
                                    assets_->manifest->num_levels());
}

std::vector<double> StreamingEnv::observation_scales() const {
    const std::size_t n = observation_size();
    std::vector<double> scales;
    if (!cfg_.normalize_observations) {
        return std::vector<double>(n, 1.0);
    }
    const auto& m = *assets_->manifest;
    const auto p = assets_->pools.size();
    const auto w = static_cast<std::size_t>(cfg_.effective_window());
    const auto levels = static_cast<std::size_t>(m.num_levels());
    const double top_kbps = m.ladder().bitrate_kbps(m.num_levels() - 1);
    scales.insert(scales.end(), p * kHistoryLength, top_kbps);
    scales.insert(scales.end(), w * levels, m.max_chunk_bytes());
    scales.insert(scales.end(), w, static_cast<double>(levels));
    scales.push_back(cfg_.buffer_max_s);
    scales.push_back(static_cast<double>(m.num_chunks()));
    scales.push_back(static_cast<double>(levels));
    scales.insert(scales.end(), p * kHistoryLength, m.chunk_length_s());
    return scales;
}

EnvStep StreamingEnv::reset(std::uint64_t episode_seed) {
    Rng rng = make_rng({cfg_.seed, episode_seed});
    std::vector<PathSpec> specs;
    for (const auto& pool : assets_->pools) {
        const auto& choices = cfg_.pool == PoolSelection::Test ? pool.test : pool.train;
        std::vector<TracePtr> all;
        const std::vector<TracePtr>* from = &choices;
        if (cfg_.pool == PoolSelection::All) {
            all = pool.train;
            if (pool.test != pool.train) {
                all.insert(all.end(), pool.test.begin(), pool.test.end());
            }
            from = &all;
        }
        if (from->empty()) {
            throw ConfigError("empty trace pool");
        }
        TracePtr trace = (*from)[uniform_index(rng, from->size())];
        const double offset = sample_episode_start(*trace, rng);
        specs.push_back({std::move(trace), offset});
    }
    engine_.reset(assets_->manifest, std::move(specs), rng());
    engine_.advance();
    active_ = true;
    substitutions_ = 0;
    return snapshot(0.0, false);
}

int StreamingEnv::substitute(int action) const {
    const auto mask = engine_.mask(cfg_.action_space);
    if (mask.allows(action)) {
        return action;
    }
    int best = -1;
    for (int a : mask.valid_actions()) {
        if (best < 0 || std::abs(a - action) < std::abs(best - action)) {
            best = a;
        }
    }
    return best;
}

EnvStep StreamingEnv::step(int action) {
    if (!active_ || engine_.done()) {
        throw ContractViolation("step called without an active episode");
    }
    const ActionSpace space = action_space();
    bool substituted = false;
    if (!engine_.mask(cfg_.action_space).allows(action)) {
        if (cfg_.strict_actions) {
            throw ContractViolation("action " + std::to_string(action) + " is masked");
        }
        action = substitute(action);
        substituted = true;
        ++substitutions_;
    }
    ChunkRequest request;
    if (space.kind == ActionSpaceKind::Rlas) {
        request = space.decode_rlas(action);
    } else {
        const int index = greedy_next_index(engine_.playing_index(), engine_.requested(), engine_.num_chunks(),
                                            engine_.window());
        request = {index - engine_.playing_index(), action};
    }
    EnvStep out = step_request(request);
    out.info.substituted = substituted;
    return out;
}

EnvStep StreamingEnv::step_request(const ChunkRequest& request) {
    if (!active_ || engine_.done()) {
        throw ContractViolation("step called without an active episode");
    }
    const int path = *engine_.pending_path();
    engine_.apply_action(path, request);
    engine_.advance();
    double reward = 0.0;
    if (engine_.done()) {
        reward = engine_.finish().reward;
        active_ = false;
    } else {
        reward = engine_.pending_reward();
    }
    return snapshot(reward, false);
}

EnvStep StreamingEnv::snapshot(double reward, bool substituted) {
    EnvStep out;
    const int path = engine_.pending_path().value_or(0);
    const Observation obs = engine_.observe(path);
    out.info.raw_observation = obs.flatten();
    out.observation = out.info.raw_observation;
    if (cfg_.normalize_observations) {
        const auto scales = observation_scales();
        for (std::size_t i = 0; i < out.observation.size(); ++i) {
            out.observation[i] /= scales[i];
        }
    }
    out.done = engine_.done();
    out.mask = out.done ? ActionMask{std::vector<bool>(static_cast<std::size_t>(action_space().size()), false)}
                        : engine_.mask(cfg_.action_space);
    out.reward = reward;
    out.info.path = out.done ? -1 : path;
    out.info.time = engine_.now();
    out.info.substituted = substituted;
    out.info.trace_ids = engine_.log().trace_ids;
    if (out.done) {
        out.info.episode = engine_.log().breakdown;
    }
    return out;
}

} // namespace msdash
