#include <cmath>
#include <map>

#include "doctest.h"
#include "rangeindex/errors.hpp"
#include "rangeindex/oracle.hpp"
#include "rangeindex/wbb_index.hpp"
#include "test_support.hpp"

using namespace rix;
using rix::testing::brute_range;

namespace {

IOConfig small_config() {
    IOConfig cfg;
    cfg.block_bits = 1024;
    cfg.memory_bits = 1 << 22;
    cfg.n_max = 1 << 20;
    return cfg;
}

std::uint64_t pow_c(unsigned i) {
    std::uint64_t v = 1;
    while (i--) v *= WbbIndex::kBranching;
    return v;
}

void check_structure(WbbIndex& idx) {
    const auto nodes = idx.walk();
    const unsigned top = idx.levels();
    std::map<std::pair<unsigned, std::uint32_t>, int> leaves_per_level;
    for (const auto& v : nodes) {
        const unsigned level = top - v.depth;
        if (v.parent >= 0) {
            // Only the root may fall below the lower bound.
            REQUIRE(2 * v.entry.weight >= pow_c(level));
        }
        REQUIRE(v.entry.weight <= 2 * pow_c(level));
        REQUIRE(v.entry.is_leaf == (v.entry.min_char == v.entry.max_char));
        if (v.entry.is_leaf) {
            REQUIRE(v.children.empty());
            ++leaves_per_level[{v.depth, v.entry.min_char}];
        } else {
            std::uint64_t sum = 0;
            REQUIRE(v.children.size() <= 4 * WbbIndex::kBranching);
            for (auto c : v.children) sum += nodes[c].entry.weight;
            REQUIRE(sum == v.entry.weight);
            REQUIRE(nodes[v.children.front()].entry.min_char == v.entry.min_char);
            REQUIRE(nodes[v.children.back()].entry.max_char == v.entry.max_char);
        }
    }
    for (const auto& [key, count] : leaves_per_level) REQUIRE(count <= 8 * static_cast<int>(WbbIndex::kBranching));
}

}  // namespace

TEST_CASE("abab query returns even positions") {
    BlockStore store(small_config());
    std::vector<std::uint32_t> x;
    for (int i = 0; i < 200; ++i) x.push_back(i % 2);
    auto idx = WbbIndex::build(x, 2, store);
    const auto got = decompress(idx.range_query(0, 0));
    REQUIRE(got.size() == 100);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == 2 * i);
}

TEST_CASE("a dominant character is split into twins") {
    BlockStore store(small_config());
    const std::vector<std::uint32_t> x(1024, 0);
    auto idx = WbbIndex::build(x, 1, store);
    REQUIRE(idx.split_char() == 0u);
    CHECK(idx.internal_sigma() == 2);
    NavCache cache(store);
    std::uint64_t first = 0, second = 0;
    for (const auto& s : idx.decompose_internal(0, 0, cache)) first += s.entry.weight;
    for (const auto& s : idx.decompose_internal(1, 1, cache)) second += s.entry.weight;
    CHECK(first == 512);
    CHECK(second == 512);
    CHECK(idx.count_range(0, 0) == 1024);
    CHECK(decompress(idx.range_query(0, 0)).size() == 1024);
}

TEST_CASE("full range selects the root and absent characters select nothing") {
    BlockStore store(small_config());
    std::mt19937_64 rng(1);
    auto x = rix::testing::random_string(rng, 5000, 30);
    for (auto& c : x)
        if (c == 17) c = 16;
    auto idx = WbbIndex::build(x, 30, store);
    const auto all = idx.decompose_range(0, 29);
    REQUIRE(all.size() == 1);
    CHECK(all[0].depth == 0);
    CHECK(idx.count_range(0, 29) == 5000);
    CHECK(idx.decompose_range(17, 17).empty());
    CHECK(idx.count_range(17, 17) == 0);
    CHECK(idx.range_query(17, 17).cardinality() == 0);
}

TEST_CASE("single character with one pruned leaf selects that leaf alone") {
    BlockStore store(small_config());
    std::vector<std::uint32_t> x(128, 0);
    for (int i = 0; i < 64; ++i) x[2 * i + 1] = 1;
    auto idx = WbbIndex::build(x, 2, store);
    const auto sel = idx.decompose_range(1, 1);
    REQUIRE(sel.size() == 1);
    CHECK(sel[0].entry.is_leaf);
    CHECK(sel[0].entry.weight == 64);
}

TEST_CASE("a single-character range selects exactly that character's leaves") {
    BlockStore store(small_config());
    std::mt19937_64 rng(21);
    const auto x = rix::testing::zipf_string(rng, 4000, 12);
    auto idx = WbbIndex::build(x, 12, store);
    const auto nodes = idx.walk();
    for (std::uint32_t a = 0; a < idx.internal_sigma(); ++a) {
        NavCache cache(store);
        const auto sel = idx.decompose_internal(a, a, cache);
        std::size_t leaves = 0;
        for (const auto& v : nodes) leaves += v.entry.is_leaf && v.entry.min_char == a;
        REQUIRE(sel.size() == leaves);
        for (const auto& s : sel) REQUIRE(s.entry.is_leaf);
    }
}

TEST_CASE("structure invariants on random Zipf strings") {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 100; ++t) {
        BlockStore store(small_config());
        const auto sigma = 2 + static_cast<std::uint32_t>(rng() % 200);
        const auto x = rix::testing::zipf_string(rng, 100000, sigma);
        auto idx = WbbIndex::build(x, sigma, store);
        check_structure(idx);
        if (t % 20 == 0) {
            // Total node count is O(sigma lg n).
            CHECK(static_cast<double>(idx.space_report().node_count) <=
                  64.0 * idx.internal_sigma() * std::log2(100000.0));
        }
    }
}

TEST_CASE("stores partition their nodes in left-to-right order") {
    BlockStore store(small_config());
    std::mt19937_64 rng(5);
    const auto x = rix::testing::zipf_string(rng, 20000, 50);
    auto idx = WbbIndex::build(x, 50, store);
    const auto mats = idx.materialized_depths();
    CHECK(mats.front() == 1);
    CHECK(mats.back() == std::max(idx.height(), 1u));
    for (std::size_t k = 1; k + 1 < mats.size(); ++k) CHECK(mats[k] == 2 * mats[k - 1]);
    std::vector<bool> seen(x.size(), false);
    for (unsigned k = 0; k < mats.size(); ++k) {
        for (const auto& entry : idx.peek_store_entries(k)) {
            REQUIRE(!entry.empty());
            const std::uint32_t c = x[entry.front()];
            for (auto p : entry) REQUIRE(!seen[p]);
            (void)c;
        }
    }
    // Each node's run in its store reproduces the node's bitmap.
    const auto nodes = idx.walk();
    std::vector<std::vector<std::vector<std::uint64_t>>> entries;
    for (unsigned k = 0; k < mats.size(); ++k) entries.push_back(idx.peek_store_entries(k));
    for (const auto& v : nodes) {
        unsigned k = 0;
        while (mats[k] < v.depth) ++k;
        std::vector<std::uint64_t> got;
        for (std::uint64_t e = v.entry.entry_first; e < v.entry.entry_first + v.entry.entry_count; ++e)
            got.insert(got.end(), entries[k][e].begin(), entries[k][e].end());
        std::sort(got.begin(), got.end());
        REQUIRE(got.size() == v.entry.weight);
        const auto [l, r] = std::pair{v.entry.min_char, v.entry.max_char};
        for (auto p : got) {
            const auto ic = idx.to_internal(x[p], x[p]);
            REQUIRE(ic.second >= l);
            REQUIRE(ic.first <= r);
        }
    }
}

TEST_CASE("materialization dominance") {
    BlockStore store(small_config());
    std::mt19937_64 rng(8);
    const auto x = rix::testing::zipf_string(rng, 30000, 40);
    auto idx = WbbIndex::build(x, 40, store);
    const auto mats = idx.materialized_depths();
    std::vector<std::vector<std::vector<std::uint64_t>>> entries;
    for (unsigned k = 0; k < mats.size(); ++k) entries.push_back(idx.peek_store_entries(k));
    for (const auto& v : idx.walk()) {
        // The root is never read: a full-range answer goes through the complement.
        if (v.depth == 0 || v.entry.is_leaf) continue;
        if (std::find(mats.begin(), mats.end(), v.depth) != mats.end()) continue;
        unsigned k = 0;
        while (mats[k] < v.depth) ++k;
        std::uint64_t parts = 0;
        std::vector<std::uint64_t> own;
        for (std::uint64_t e = v.entry.entry_first; e < v.entry.entry_first + v.entry.entry_count; ++e) {
            parts += size_bits(compress_positions(entries[k][e], x.size()));
            own.insert(own.end(), entries[k][e].begin(), entries[k][e].end());
        }
        std::sort(own.begin(), own.end());
        INFO("depth ", v.depth, " store depth ", mats[k], " weight ", v.entry.weight, " entries ", v.entry.entry_count, " levels ", idx.levels());
        REQUIRE(parts <= 2 * size_bits(compress_positions(own, x.size())));
    }
}

TEST_CASE("exhaustive ranges on small strings match the oracle") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 300; ++t) {
        BlockStore store(small_config());
        const std::size_t n = 1 + rng() % 64;
        const auto sigma = 1 + static_cast<std::uint32_t>(rng() % 8);
        const auto x = rix::testing::random_string(rng, n, sigma);
        auto idx = WbbIndex::build(x, sigma, store);
        for (std::uint32_t lo = 0; lo < sigma; ++lo)
            for (std::uint32_t hi = lo; hi < sigma; ++hi) {
                const auto expect = brute_range(x, lo, hi);
                REQUIRE(decompress(idx.range_query(lo, hi)) == expect);
                REQUIRE(idx.count_range(lo, hi) == expect.size());
            }
    }
}

TEST_CASE("short strings over wide alphabets") {
    // A page ending in a leaf slot narrower than two character fields.
    {
        BlockStore store{IOConfig{}};
        const std::vector<std::uint32_t> x = {66, 42};
        auto idx = WbbIndex::build(x, 114, store);
        CHECK(decompress(idx.range_query(42, 59)) == brute_range(x, 42, 59));
    }
    std::mt19937_64 rng(17);
    for (int t = 0; t < 400; ++t) {
        BlockStore store{IOConfig{}};
        const std::size_t n = 1 + rng() % 6;
        const auto sigma = 16 + static_cast<std::uint32_t>(rng() % 241);
        const auto x = rix::testing::random_string(rng, n, sigma);
        auto idx = WbbIndex::build(x, sigma, store);
        for (int q = 0; q < 40; ++q) {
            auto lo = static_cast<std::uint32_t>(rng() % sigma), hi = static_cast<std::uint32_t>(rng() % sigma);
            if (lo > hi) std::swap(lo, hi);
            REQUIRE(decompress(idx.range_query(lo, hi)) == brute_range(x, lo, hi));
        }
    }
}

TEST_CASE("random queries match the oracle in every complement mode") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 10; ++t) {
        BlockStore store(small_config());
        const auto sigma = 2 + static_cast<std::uint32_t>(rng() % 255);
        const auto x = t % 2 ? rix::testing::zipf_string(rng, 20000, sigma) : rix::testing::random_string(rng, 20000, sigma);
        auto idx = WbbIndex::build(x, sigma, store);
        for (auto mode : {ComplementMode::kAuto, ComplementMode::kNever, ComplementMode::kAlways}) {
            idx.set_complement_mode(mode);
            for (int q = 0; q < 20; ++q) {
                std::uint32_t lo = rng() % sigma, hi = rng() % sigma;
                if (lo > hi) std::swap(lo, hi);
                WbbQueryTrace trace;
                REQUIRE(decompress(idx.range_query(lo, hi, &trace)) == brute_range(x, lo, hi));
                // At most a few runs per store.
                std::map<unsigned, int> per_store;
                for (const auto& c : trace.chunks) ++per_store[c.store];
                for (const auto& [s, k] : per_store) REQUIRE(k <= 4);
            }
        }
    }
}

TEST_CASE("invalid ranges are rejected") {
    BlockStore store(small_config());
    auto idx = WbbIndex::build(std::vector<std::uint32_t>{0, 1, 2}, 3, store);
    CHECK_THROWS_AS(idx.range_query(2, 1), Error);
    CHECK_THROWS_AS(idx.count_range(0, 3), Error);
    CHECK_THROWS_AS(WbbIndex::build(std::vector<std::uint32_t>{}, 3, store), Error);
}

TEST_CASE("space report") {
    BlockStore store(small_config());
    std::mt19937_64 rng(4);
    const auto x = rix::testing::zipf_string(rng, 10000, 64);
    auto idx = WbbIndex::build(x, 64, store);
    const auto rep = idx.space_report();
    std::uint64_t sum = rep.tree_bits;
    for (auto b : rep.store_bits) sum += b;
    CHECK(rep.total_bits == sum);
    CHECK(std::abs(rep.h0 - oracle::entropy(x)) <= 1e-9 * std::max(1.0, rep.h0));
}

TEST_CASE("reopen from manifest") {
    BlockStore store(small_config());
    std::mt19937_64 rng(6);
    const auto x = rix::testing::zipf_string(rng, 3000, 20);
    auto idx = WbbIndex::build(x, 20, store);
    Manifest m;
    idx.describe(m);
    auto again = WbbIndex::open(store, Manifest::parse(m.to_string()));
    for (std::uint32_t lo = 0; lo < 20; lo += 3) REQUIRE(again.range_query(lo, 19) == idx.range_query(lo, 19));
}
