#include "msdash/actions.hpp"

#include <algorithm>

#include "msdash/errors.hpp"

namespace msdash {

int ChunkSet::count() const noexcept {
    return static_cast<int>(std::count(bits_.begin(), bits_.end(), true));
}

ActionSpaceKind parse_action_space(const std::string& name) {
    if (name == "rlas" || name == "RLAS") {
        return ActionSpaceKind::Rlas;
    }
    if (name == "rlags" || name == "RLAGS") {
        return ActionSpaceKind::Rlags;
    }
    throw UsageError("unknown action space '" + name + "' (expected rlas or rlags)");
}

std::string to_string(ActionSpaceKind kind) {
    return kind == ActionSpaceKind::Rlas ? "rlas" : "rlags";
}

ChunkRequest ActionSpace::decode_rlas(int action) const {
    if (action < 0 || action >= window * levels) {
        throw UsageError("action " + std::to_string(action) + " outside [0, " + std::to_string(window * levels) + ")");
    }
    return {action / levels + 1, action % levels};
}

int ActionSpace::encode_rlas(const ChunkRequest& request) const {
    if (request.index_offset < 1 || request.index_offset > window || request.level < 0 || request.level >= levels) {
        throw UsageError("request (" + std::to_string(request.index_offset) + ", " + std::to_string(request.level) +
                         ") outside the action space");
    }
    return (request.index_offset - 1) * levels + request.level;
}

bool ActionMask::any() const noexcept {
    return std::find(bits.begin(), bits.end(), true) != bits.end();
}

int ActionMask::count() const noexcept {
    return static_cast<int>(std::count(bits.begin(), bits.end(), true));
}

std::vector<int> ActionMask::valid_actions() const {
    std::vector<int> out;
    for (std::size_t a = 0; a < bits.size(); ++a) {
        if (bits[a]) {
            out.push_back(static_cast<int>(a));
        }
    }
    return out;
}

int max_index_offset(int window, int playing_index, int num_chunks) noexcept {
    return std::max(0, std::min(window, num_chunks - playing_index));
}

ActionMask compute_mask(const ActionSpace& space, int playing_index, const ChunkSet& requested, int num_chunks) {
    if (playing_index < 0 || playing_index > num_chunks) {
        throw UsageError("playing index outside [0, N]");
    }
    ActionMask mask;
    mask.bits.assign(static_cast<std::size_t>(space.size()), false);
    const int last = max_index_offset(space.window, playing_index, num_chunks);
    if (space.kind == ActionSpaceKind::Rlags) {
        const bool open = greedy_next_index(playing_index, requested, num_chunks, space.window) != 0;
        std::fill(mask.bits.begin(), mask.bits.end(), open);
        return mask;
    }
    for (int offset = 1; offset <= last; ++offset) {
        if (requested.contains(playing_index + offset)) {
            continue;
        }
        const auto row = static_cast<std::size_t>(offset - 1) * static_cast<std::size_t>(space.levels);
        std::fill_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(row), space.levels, true);
    }
    return mask;
}

int greedy_next_index(int playing_index, const ChunkSet& requested, int num_chunks, int window) {
    const int last = playing_index + max_index_offset(window, playing_index, num_chunks);
    for (int index = playing_index + 1; index <= last; ++index) {
        if (!requested.contains(index)) {
            return index;
        }
    }
    return 0;
}

} // namespace msdash
