#include "msdash/policy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "msdash/errors.hpp"

namespace msdash {

double harmonic_mean(std::span<const double> samples) {
    if (samples.empty()) {
        return 0.0;
    }
    double inv = 0.0;
    for (double s : samples) {
        if (!(s > 0.0)) {
            return 0.0;
        }
        inv += 1.0 / s;
    }
    return static_cast<double>(samples.size()) / inv;
}

int throughput_rule(std::span<const double> history_kbps, const QualityLadder& ladder) {
    const double estimate = harmonic_mean(history_kbps);
    int level = 0;
    for (int l = 0; l < ladder.size(); ++l) {
        if (ladder.bitrate_kbps(l) < estimate) {
            level = l;
        }
    }
    return level;
}

BolaParams derive_bola_params(const QualityLadder& ladder, double chunk_length_s, double top_level_buffer_s) {
    if (!(chunk_length_s > 0.0) || !(top_level_buffer_s > 0.0)) {
        throw UsageError("BOLA needs a positive chunk length and target buffer");
    }
    BolaParams params;
    for (double kbps : ladder.bitrates_kbps()) {
        params.level_bits.push_back(kbps * 1000.0 * chunk_length_s);
    }
    const auto u = ladder.utilities();
    const auto& s = params.level_bits;
    const int top = ladder.size() - 1;

    // Level 0 wins at Q = 0 iff gp / s_0 >= (u_m + gp) / s_m for every m,
    // i.e. gp >= u_m * s_0 / (s_m - s_0).
    params.gp = 1.0;
    for (int m = 1; m <= top; ++m) {
        params.gp = std::max(params.gp, u[m] * s[0] / (s[m] - s[0]));
    }

    // The top level beats level m once Q >= v * c_m.
    double c_max = 0.0;
    for (int m = 0; m < top; ++m) {
        const double c = ((u[m] + params.gp) * s[top] - (u[top] + params.gp) * s[m]) / (s[top] - s[m]);
        c_max = std::max(c_max, c);
    }
    params.v = c_max > 0.0 ? top_level_buffer_s / c_max : top_level_buffer_s;
    return params;
}

int bola_rule(double buffer_s, const QualityLadder& ladder, const BolaParams& params) {
    if (!(buffer_s >= 0.0)) {
        throw UsageError("BOLA buffer level must be non-negative");
    }
    const auto u = ladder.utilities();
    int best = 0;
    double best_score = 0.0;
    for (int m = 0; m < ladder.size(); ++m) {
        const double score = (params.v * (u[m] + params.gp) - buffer_s) / params.level_bits[static_cast<std::size_t>(m)];
        if (m == 0 || score > best_score) {
            best = m;
            best_score = score;
        }
    }
    return best;
}

double default_bola_top_buffer(double buffer_max_s, int window, double chunk_length_s) {
    const double fullest = std::min(buffer_max_s, static_cast<double>(window) * chunk_length_s) - chunk_length_s;
    return std::max(fullest, chunk_length_s);
}

ChunkRequest GreedyPolicy::decide(const SimEngine& engine, int path) {
    const int index = greedy_next_index(engine.playing_index(), engine.requested(), engine.num_chunks(),
                                        engine.window());
    if (index == 0) {
        throw ContractViolation(name() + ": no unrequested chunk in the window");
    }
    return {index - engine.playing_index(), choose_level(engine, path)};
}

int ThroughputPolicy::choose_level(const SimEngine& engine, int path) {
    std::vector<double> history;
    for (const auto& h : engine.path(path).history) {
        history.push_back(h.throughput_kbps);
    }
    return throughput_rule(history, engine.manifest().ladder());
}

int BolaPolicy::choose_level(const SimEngine& engine, int path) {
    (void)path;
    const auto& manifest = engine.manifest();
    const double top = top_buffer_ > 0.0 ? top_buffer_
                                         : default_bola_top_buffer(engine.config().buffer_max_s, engine.window(),
                                                                   manifest.chunk_length_s());
    const BolaParams params = derive_bola_params(manifest.ladder(), manifest.chunk_length_s(), top);
    return bola_rule(engine.buffer_s(), manifest.ladder(), params);
}

int FixedLevelPolicy::choose_level(const SimEngine& engine, int path) {
    (void)path;
    if (level_ < 0 || level_ >= engine.manifest().num_levels()) {
        throw UsageError("fixed level " + std::to_string(level_) + " outside the ladder");
    }
    return level_;
}

ChunkRequest RandomValidPolicy::decide(const SimEngine& engine, int path) {
    (void)path;
    const ActionSpace space = engine.action_space(space_);
    const auto valid = engine.mask(space_).valid_actions();
    if (valid.empty()) {
        throw ContractViolation("random policy asked to decide with an empty mask");
    }
    const int action = valid[uniform_index(rng_, valid.size())];
    if (space_ == ActionSpaceKind::Rlas) {
        return space.decode_rlas(action);
    }
    const int index = greedy_next_index(engine.playing_index(), engine.requested(), engine.num_chunks(),
                                        engine.window());
    return {index - engine.playing_index(), action};
}

ChunkRequest ScriptedPolicy::decide(const SimEngine& engine, int path) {
    (void)engine;
    (void)path;
    if (cursor_ >= script_.size()) {
        throw UsageError(label_ + ": script exhausted after " + std::to_string(script_.size()) + " requests");
    }
    return script_[cursor_++];
}

std::vector<ChunkRequest> load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path.string(), 0, "cannot open script");
    }
    std::vector<ChunkRequest> script;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        ChunkRequest r;
        if (!(row >> r.index_offset)) {
            continue;
        }
        std::string extra;
        if (!(row >> r.level) || (row >> extra)) {
            throw ParseError(path.string(), line_no, "expected 'offset,level'");
        }
        script.push_back(r);
    }
    return script;
}

std::unique_ptr<Policy> make_policy(const std::string& spec, std::uint64_t seed) {
    if (spec == "throughput") {
        return std::make_unique<ThroughputPolicy>();
    }
    if (spec == "bola") {
        return std::make_unique<BolaPolicy>();
    }
    if (spec == "random") {
        return std::make_unique<RandomValidPolicy>(seed);
    }
    if (spec == "random-rlags") {
        return std::make_unique<RandomValidPolicy>(seed, ActionSpaceKind::Rlags);
    }
    if (spec.rfind("fixed:", 0) == 0) {
        const std::string arg = spec.substr(6);
        std::size_t used = 0;
        int level = -1;
        try {
            level = std::stoi(arg, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != arg.size() || level < 0) {
            throw UsageError("bad fixed level in policy '" + spec + "'");
        }
        return std::make_unique<FixedLevelPolicy>(level);
    }
    if (spec.rfind("scripted:", 0) == 0) {
        return std::make_unique<ScriptedPolicy>(load_script(spec.substr(9)), spec);
    }
    if (spec == "external") {
        throw UsageError("policy 'external' is driven through serve-bridge, not the batch runner");
    }
    throw UsageError("unknown policy '" + spec + "'");
}

ChunkRequest policy_decide(Policy& policy, const SimEngine& engine, int path) {
    const ChunkRequest request = policy.decide(engine, path);
    const ActionSpace space = engine.action_space(ActionSpaceKind::Rlas);
    const bool in_space = request.index_offset >= 1 && request.index_offset <= space.window && request.level >= 0 &&
                          request.level < space.levels;
    if (!in_space || !engine.mask(ActionSpaceKind::Rlas).allows(space.encode_rlas(request))) {
        throw ContractViolation(policy.name() + " returned masked request (" + std::to_string(request.index_offset) +
                                ", " + std::to_string(request.level) + ")");
    }
    return request;
}

} // namespace msdash
