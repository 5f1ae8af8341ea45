#pragma once

#include <string>
#include <vector>

namespace msdash {

/// Membership bitmap over chunk indices 1..N.
class ChunkSet {
public:
    ChunkSet() = default;
    explicit ChunkSet(int num_chunks) : bits_(static_cast<std::size_t>(num_chunks) + 1, false) {}

    int capacity() const noexcept { return static_cast<int>(bits_.size()) - 1; }
    bool contains(int index) const noexcept {
        return index >= 1 && index < static_cast<int>(bits_.size()) && bits_[static_cast<std::size_t>(index)];
    }
    void insert(int index) { bits_.at(static_cast<std::size_t>(index)) = true; }
    void erase(int index) { bits_.at(static_cast<std::size_t>(index)) = false; }
    int count() const noexcept;

private:
    std::vector<bool> bits_;
};

/// A request decision as the engine sees it: chunk c_t + index_offset at `level`.
struct ChunkRequest {
    int index_offset = 1;
    int level = 0;

    friend bool operator==(const ChunkRequest&, const ChunkRequest&) = default;
};

enum class ActionSpaceKind {
    Rlags, ///< level only; the chunk index comes from greedy scheduling
    Rlas,  ///< (index offset, level) flattened row-major by offset then level
};

ActionSpaceKind parse_action_space(const std::string& name);
std::string to_string(ActionSpaceKind kind);

struct ActionSpace {
    ActionSpaceKind kind = ActionSpaceKind::Rlas;
    int window = 7;
    int levels = 7;

    int size() const noexcept { return kind == ActionSpaceKind::Rlas ? window * levels : levels; }

    /// RLAS only: a -> (a / L + 1, a % L). Throws UsageError when out of range.
    ChunkRequest decode_rlas(int action) const;
    /// RLAS only: (offset, level) -> (offset - 1) * L + level.
    int encode_rlas(const ChunkRequest& request) const;
};

struct ActionMask {
    std::vector<bool> bits;

    bool allows(int action) const noexcept {
        return action >= 0 && action < static_cast<int>(bits.size()) && bits[static_cast<std::size_t>(action)];
    }
    bool any() const noexcept;
    int count() const noexcept;
    std::vector<int> valid_actions() const;
};

/// Largest valid index offset: min(W, N - c_t).
int max_index_offset(int window, int playing_index, int num_chunks) noexcept;

/// Validity of every action: offset in [1, min(W, N - c_t)] with chunk c_t + offset not
/// yet requested. For RLAGS all L bits are set iff at least one such offset exists.
ActionMask compute_mask(const ActionSpace& space, int playing_index, const ChunkSet& requested, int num_chunks);

/// Smallest index in [c_t + 1, min(c_t + W, N)] that was never requested, or 0 if none.
int greedy_next_index(int playing_index, const ChunkSet& requested, int num_chunks, int window);

} // namespace msdash
