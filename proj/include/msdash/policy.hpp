#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "msdash/actions.hpp"
#include "msdash/engine.hpp"
#include "msdash/media.hpp"

namespace msdash {

/// Harmonic mean of the samples; 0 for an empty span.
double harmonic_mean(std::span<const double> samples);

/// Highest level whose bitrate is strictly below the harmonic mean of the history.
/// Level 0 when the history is empty or no level qualifies.
int throughput_rule(std::span<const double> history_kbps, const QualityLadder& ladder);

/// BOLA-basic parameters. The objective of level m at buffer Q (seconds) is
///   (v * (u_m + gp) - Q) / bits_m
/// with u_m the ladder utilities and bits_m the nominal chunk size in bits.
struct BolaParams {
    double v = 0.0;
    double gp = 0.0;
    std::vector<double> level_bits;
};

/// gp is the smallest value >= 1 that makes level 0 the maximizer at an empty buffer;
/// v places the switch to the top level exactly at `top_level_buffer_s`.
BolaParams derive_bola_params(const QualityLadder& ladder, double chunk_length_s, double top_level_buffer_s);

/// Argmax of the BOLA objective; ties go to the lower level.
int bola_rule(double buffer_s, const QualityLadder& ladder, const BolaParams& params);

/// Buffer level at which the default BOLA derivation reaches the top level:
/// the fullest buffer a free path can see, min(B_max, W * len) - len.
double default_bola_top_buffer(double buffer_max_s, int window, double chunk_length_s);

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    /// Called before each episode. Stateful policies reseed or rewind here.
    virtual void reset(std::uint64_t episode_seed) { (void)episode_seed; }
    virtual ChunkRequest decide(const SimEngine& engine, int path) = 0;
};

/// Greedy scheduling plus a per-request level rule.
class GreedyPolicy : public Policy {
public:
    ChunkRequest decide(const SimEngine& engine, int path) final;

protected:
    virtual int choose_level(const SimEngine& engine, int path) = 0;
};

class ThroughputPolicy final : public GreedyPolicy {
public:
    std::string name() const override { return "throughput"; }

protected:
    int choose_level(const SimEngine& engine, int path) override;
};

class BolaPolicy final : public GreedyPolicy {
public:
    /// top_level_buffer_s <= 0 selects default_bola_top_buffer() for the engine at hand.
    explicit BolaPolicy(double top_level_buffer_s = 0.0) : top_buffer_(top_level_buffer_s) {}
    std::string name() const override { return "bola"; }

protected:
    int choose_level(const SimEngine& engine, int path) override;

private:
    double top_buffer_;
};

class FixedLevelPolicy final : public GreedyPolicy {
public:
    explicit FixedLevelPolicy(int level) : level_(level) {}
    std::string name() const override { return "fixed:" + std::to_string(level_); }

protected:
    int choose_level(const SimEngine& engine, int path) override;

private:
    int level_;
};

/// Uniform over the valid actions of the chosen action space.
class RandomValidPolicy final : public Policy {
public:
    explicit RandomValidPolicy(std::uint64_t seed, ActionSpaceKind space = ActionSpaceKind::Rlas)
        : seed_(seed), space_(space), rng_(make_rng({seed})) {}
    std::string name() const override { return "random"; }
    void reset(std::uint64_t episode_seed) override { rng_ = make_rng({seed_, episode_seed}); }
    ChunkRequest decide(const SimEngine& engine, int path) override;

private:
    std::uint64_t seed_;
    ActionSpaceKind space_;
    Rng rng_;
};

/// Replays a fixed request list; rewinds on reset().
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<ChunkRequest> script, std::string label = "scripted")
        : script_(std::move(script)), label_(std::move(label)) {}
    std::string name() const override { return label_; }
    void reset(std::uint64_t) override { cursor_ = 0; }
    ChunkRequest decide(const SimEngine& engine, int path) override;

private:
    std::vector<ChunkRequest> script_;
    std::string label_;
    std::size_t cursor_ = 0;
};

/// One "offset,level" (or "offset level") pair per line; '#' starts a comment.
std::vector<ChunkRequest> load_script(const std::filesystem::path& path);

/// Builds a policy from its name: throughput, bola, random, fixed:<level>,
/// scripted:<file>. "external" is rejected: external agents drive the bridge.
std::unique_ptr<Policy> make_policy(const std::string& spec, std::uint64_t seed = 0);

/// Asks the policy and checks the answer against the current mask.
/// Throws ContractViolation when the policy returns a masked request.
ChunkRequest policy_decide(Policy& policy, const SimEngine& engine, int path);

} // namespace msdash
