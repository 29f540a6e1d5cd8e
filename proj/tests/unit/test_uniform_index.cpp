#include "doctest.h"
#include "rangeindex/errors.hpp"
#include "rangeindex/uniform_index.hpp"
#include "test_support.hpp"

using namespace rix;
using rix::testing::brute_range;

namespace {

IOConfig small_config() {
    IOConfig cfg;
    cfg.block_bits = 256;
    cfg.memory_bits = 1 << 20;
    cfg.n_max = 1 << 16;
    return cfg;
}

}  // namespace

TEST_CASE("prefix counts for abcab") {
    BlockStore store(small_config());
    const std::vector<std::uint32_t> x{0, 1, 2, 0, 1};
    auto idx = UniformIndex::build(x, 4, store);
    CHECK(idx.prefix_counts() == std::vector<std::uint64_t>{0, 2, 4, 5, 5});
    CHECK(idx.count_range(0, 1) == 4);
    CHECK(idx.count_range(3, 3) == 0);
    CHECK(decompress(idx.range_query(1, 2)) == std::vector<std::uint64_t>{1, 2, 4});
}

TEST_CASE("node bitmaps are the union of their children") {
    BlockStore store(small_config());
    std::mt19937_64 rng(5);
    const auto x = rix::testing::random_string(rng, 3000, 13);
    auto idx = UniformIndex::build(x, 13, store);
    CHECK(idx.padded_sigma() == 16);
    CHECK(idx.height() == 4);
    for (unsigned d = 0; d < idx.height(); ++d)
        for (std::uint64_t i = 0; i < (std::uint64_t{1} << d); ++i) {
            std::vector<CompressedBitmap> kids{idx.peek_node({d + 1, 2 * i}), idx.peek_node({d + 1, 2 * i + 1})};
            REQUIRE(merge_disjoint(kids) == idx.peek_node({d, i}));
        }
    CHECK(idx.node_cardinality({0, 0}) == 3000);
}

TEST_CASE("cover is the canonical decomposition") {
    BlockStore store(small_config());
    const std::vector<std::uint32_t> x{0, 1, 2, 3, 4, 5, 6, 7};
    auto idx = UniformIndex::build(x, 8, store);
    CHECK(idx.cover(0, 7) == std::vector<TreeNodeRef>{{0, 0}});
    CHECK(idx.cover(1, 6) == std::vector<TreeNodeRef>{{3, 1}, {2, 1}, {2, 2}, {3, 6}});
    CHECK(idx.cover(4, 4) == std::vector<TreeNodeRef>{{3, 4}});
    for (std::uint32_t lo = 0; lo < 8; ++lo)
        for (std::uint32_t hi = lo; hi < 8; ++hi) {
            const auto nodes = idx.cover(lo, hi);
            REQUIRE(nodes.size() <= 2 * idx.height());
            std::uint64_t next = lo;
            for (const auto& node : nodes) {
                const std::uint64_t width = std::uint64_t{8} >> node.level;
                REQUIRE(node.index * width == next);
                next += width;
            }
            REQUIRE(next == hi + std::uint64_t{1});
        }
}

TEST_CASE("range_query matches brute force in every complement mode") {
    BlockStore store(small_config());
    std::mt19937_64 rng(17);
    const auto x = rix::testing::zipf_string(rng, 2000, 21);
    auto idx = UniformIndex::build(x, 21, store);
    for (auto mode : {ComplementMode::kAuto, ComplementMode::kNever, ComplementMode::kAlways}) {
        idx.set_complement_mode(mode);
        for (std::uint32_t lo = 0; lo < 21; ++lo)
            for (std::uint32_t hi = lo; hi < 21; ++hi) {
                UniformQueryTrace trace;
                const auto bm = idx.range_query(lo, hi, &trace);
                const auto expect = brute_range(x, lo, hi);
                REQUIRE(decompress(bm) == expect);
                REQUIRE(idx.count_range(lo, hi) == expect.size());
                if (mode == ComplementMode::kAuto) REQUIRE(trace.used_complement == (2 * expect.size() > x.size()));
            }
    }
}

TEST_CASE("single-character alphabet") {
    BlockStore store(small_config());
    const std::vector<std::uint32_t> x(10, 0);
    auto idx = UniformIndex::build(x, 1, store);
    CHECK(idx.height() == 0);
    CHECK(decompress(idx.range_query(0, 0)).size() == 10);
}

TEST_CASE("invalid input is rejected") {
    BlockStore store(small_config());
    CHECK_THROWS_AS(UniformIndex::build(std::vector<std::uint32_t>{}, 4, store), Error);
    CHECK_THROWS_AS(UniformIndex::build(std::vector<std::uint32_t>{4}, 4, store), Error);
    auto idx = UniformIndex::build(std::vector<std::uint32_t>{0, 1}, 2, store);
    CHECK_THROWS_AS(idx.range_query(1, 0), Error);
    CHECK_THROWS_AS(idx.count_range(0, 2), Error);
}

TEST_CASE("reopen from manifest answers identically") {
    BlockStore store(small_config());
    std::mt19937_64 rng(23);
    const auto x = rix::testing::random_string(rng, 500, 9);
    auto idx = UniformIndex::build(x, 9, store);
    Manifest m;
    idx.describe(m);
    auto again = UniformIndex::open(store, Manifest::parse(m.to_string()));
    for (std::uint32_t lo = 0; lo < 9; ++lo)
        REQUIRE(again.range_query(lo, 8) == idx.range_query(lo, 8));
}
