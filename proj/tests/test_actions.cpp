#include <doctest.h>

#include "msdash/actions.hpp"
#include "msdash/errors.hpp"

using namespace msdash;

namespace {

ChunkSet requested_of(int n, std::initializer_list<int> indices) {
    ChunkSet s(n);
    for (int i : indices) {
        s.insert(i);
    }
    return s;
}

} // namespace

TEST_CASE("chunk set") {
    ChunkSet s(10);
    CHECK(s.capacity() == 10);
    CHECK(s.count() == 0);
    s.insert(1);
    s.insert(10);
    CHECK(s.contains(1));
    CHECK(s.contains(10));
    CHECK_FALSE(s.contains(0));
    CHECK_FALSE(s.contains(11));
    CHECK(s.count() == 2);
    s.erase(1);
    CHECK(s.count() == 1);
}

TEST_CASE("action encoding") {
    const ActionSpace rlas{ActionSpaceKind::Rlas, 7, 7};
    CHECK(rlas.size() == 49);
    CHECK(ActionSpace{ActionSpaceKind::Rlags, 7, 7}.size() == 7);
    CHECK(rlas.encode_rlas({3, 2}) == 16);
    CHECK(rlas.decode_rlas(16) == ChunkRequest{3, 2});
    for (int a = 0; a < rlas.size(); ++a) {
        CHECK(rlas.encode_rlas(rlas.decode_rlas(a)) == a);
    }
    CHECK_THROWS_AS(rlas.decode_rlas(49), UsageError);
    CHECK_THROWS_AS(rlas.encode_rlas({8, 0}), UsageError);
    CHECK(parse_action_space("rlags") == ActionSpaceKind::Rlags);
    CHECK(to_string(ActionSpaceKind::Rlas) == "rlas");
    CHECK_THROWS_AS(parse_action_space("xyz"), UsageError);
}

TEST_CASE("mask near the end of the video") {
    const ActionSpace space{ActionSpaceKind::Rlas, 7, 7};
    const auto mask = compute_mask(space, 58, ChunkSet(60), 60);
    CHECK(mask.count() == 14);
    for (int a = 0; a < 49; ++a) {
        CHECK(mask.allows(a) == (a < 14));
    }
    CHECK(max_index_offset(7, 58, 60) == 2);
}

TEST_CASE("mask skips requested chunks") {
    const ActionSpace space{ActionSpaceKind::Rlas, 7, 7};
    const auto mask = compute_mask(space, 4, requested_of(60, {1, 2, 3, 4, 5}), 60);
    for (int l = 0; l < 7; ++l) {
        CHECK_FALSE(mask.allows(space.encode_rlas({1, l})));
        for (int k = 2; k <= 7; ++k) {
            CHECK(mask.allows(space.encode_rlas({k, l})));
        }
    }
    // playing chunk 4, (3, 2) is chunk 7 at level 2
    CHECK(mask.allows(space.encode_rlas({3, 2})));
    CHECK(mask.valid_actions().size() == 42);

    const ActionSpace rlags{ActionSpaceKind::Rlags, 7, 7};
    CHECK(compute_mask(rlags, 4, requested_of(60, {5}), 60).count() == 7);
    ChunkSet full(60);
    for (int i = 1; i <= 11; ++i) {
        full.insert(i);
    }
    CHECK_FALSE(compute_mask(rlags, 4, full, 60).any());
    CHECK_FALSE(compute_mask(space, 4, full, 60).any());
}

TEST_CASE("greedy index") {
    CHECK(greedy_next_index(4, requested_of(60, {1, 2, 3, 4, 5}), 60, 7) == 6);
    CHECK(greedy_next_index(0, ChunkSet(60), 60, 7) == 1);
    CHECK(greedy_next_index(4, requested_of(60, {1, 2, 3, 4, 5, 6, 7}), 60, 7) == 8);
    CHECK(greedy_next_index(58, requested_of(60, {59, 60}), 60, 7) == 0);
    // smallest gap, not the first index after the last request
    CHECK(greedy_next_index(0, requested_of(60, {1, 3}), 60, 7) == 2);
}
