#include <map>
#include <set>

#include "doctest.h"
#include "rangeindex/dynamic.hpp"
#include "rangeindex/errors.hpp"
#include "rangeindex/oracle.hpp"
#include "test_support.hpp"

using namespace rix;
using rix::testing::brute_range;
using rix::testing::random_string;

namespace {

IOConfig small_config() {
    IOConfig cfg;
    cfg.block_bits = 1024;
    cfg.memory_bits = 1 << 22;
    cfg.n_max = 1 << 20;
    return cfg;
}

const DynamicVariant kAll[] = {DynamicVariant::kDirectAppend, DynamicVariant::kBufferedAppend,
                               DynamicVariant::kFullyDynamic};

std::vector<std::uint64_t> positions(const CompressedBitmap& bm) { return decompress(bm); }

void expect_matches(DynamicIndex& d, const std::vector<std::uint32_t>& s, std::uint32_t lo, std::uint32_t hi) {
    const auto want = brute_range(s, lo, hi);
    REQUIRE(positions(d.range_query(lo, hi)) == want);
    REQUIRE(d.count_range(lo, hi) == want.size());
}

}  // namespace

TEST_CASE("bbi: point query sees unflushed inserts; delete then reinsert") {
    BlockStore store(small_config());
    BlockPool pool(store);
    BufferedBitmapIndex bbi(pool, 16, 20, false);
    bbi.update(7, 42, true);
    REQUIRE(decompress(bbi.point_query(7, 100)) == std::vector<std::uint64_t>{42});
    bbi.update(7, 42, false);
    REQUIRE(bbi.point_query(7, 100).cardinality() == 0);
    bbi.update(7, 42, true);
    REQUIRE(decompress(bbi.point_query(7, 100)) == std::vector<std::uint64_t>{42});
    bbi.update(7, 99, false);  // absent: no-op
    REQUIRE(decompress(bbi.point_query(7, 100)) == std::vector<std::uint64_t>{42});
    bbi.check();
}

TEST_CASE("bbi: randomized updates match a mirror; drain preserves the logical state") {
    for (bool direct : {false, true}) {
        BlockStore store(small_config());
        BlockPool pool(store);
        BufferedBitmapIndex bbi(pool, 12, 20, direct);
        std::mt19937_64 rng(5 + direct);
        std::map<std::uint64_t, std::set<std::uint64_t>> mirror;
        std::uniform_int_distribution<std::uint64_t> id(0, 40), pos(0, 5000);
        for (int step = 0; step < 20000; ++step) {
            const std::uint64_t a = id(rng), p = pos(rng);
            const bool ins = rng() % 3 != 0;
            bbi.update(a, p, ins);
            if (ins) mirror[a].insert(p);
            else mirror[a].erase(p);
            if (step % 997 == 0) {
                const std::uint64_t q = id(rng);
                const std::vector<std::uint64_t> want(mirror[q].begin(), mirror[q].end());
                REQUIRE(decompress(bbi.point_query(q, 5001)) == want);
                bbi.check();
            }
        }
        std::vector<BbiSegment> want;
        for (const auto& [a, ps] : mirror)
            if (!ps.empty()) want.push_back(BbiSegment{a, {ps.begin(), ps.end()}});
        REQUIRE(bbi.logical() == want);
        bbi.drain();
        REQUIRE(bbi.pending() == 0);
        REQUIRE(bbi.stored() == want);
        bbi.check();
        // Leaf count stays within 2s + 1 for s = exact size in blocks.
        const std::uint64_t s = (bbi.exact_bits() + store.block_bits() - 1) / store.block_bits();
        REQUIRE(bbi.leaf_count() <= 2 * s + 1);
    }
}

TEST_CASE("bbi: replace_range and read_range") {
    BlockStore store(small_config());
    BlockPool pool(store);
    BufferedBitmapIndex bbi(pool, 12, 20, false);
    std::vector<BbiSegment> segs;
    for (std::uint64_t a = 0; a < 30; ++a) {
        BbiSegment s{a, {}};
        for (std::uint64_t p = a; p < 3000; p += 7 + a) s.positions.push_back(p);
        segs.push_back(s);
    }
    bbi.bulk_load(segs);
    bbi.update(12, 1, true);
    const std::vector<BbiSegment> repl{{10, {1, 2, 3}}, {15, {9}}};
    bbi.replace_range(10, 20, repl);
    std::vector<BbiSegment> got;
    bbi.read_range(9, 21, got);
    REQUIRE(got.size() == 4);
    REQUIRE(got[0] == segs[9]);
    REQUIRE(got[1] == repl[0]);
    REQUIRE(got[2] == repl[1]);
    REQUIRE(got[3] == segs[20]);
    bbi.check();
}

TEST_CASE("deletion tree: translation examples") {
    BlockStore store(small_config());
    BlockPool pool(store);
    DeletionTree t(pool);
    for (std::uint64_t p = 0; p < 5; ++p) REQUIRE(t.to_original(p) == p);
    t.insert(2);
    REQUIRE(t.to_original(2) == 3);
    REQUIRE(t.to_current(3) == 2);
    REQUIRE(t.to_current(2) == DeletionTree::kDeleted);
    REQUIRE(t.to_original(1) == 1);
    REQUIRE(t.to_current(4) == 3);
}

TEST_CASE("deletion tree: random deletions against a live list") {
    BlockStore store(small_config());
    BlockPool pool(store);
    std::mt19937_64 rng(17);
    for (int round = 0; round < 5; ++round) {
        DeletionTree t(pool);
        const std::uint64_t n = 3000;
        std::vector<std::uint64_t> live(n);
        for (std::uint64_t i = 0; i < n; ++i) live[i] = i;
        while (live.size() > 200) {
            const std::uint64_t c = rng() % live.size();
            REQUIRE(t.to_original(c) == live[c]);
            t.insert(live[c]);
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(c));
        }
        t.check();
        for (std::uint64_t c = 0; c < live.size(); ++c) {
            REQUIRE(t.to_original(c) == live[c]);
            REQUIRE(t.to_current(live[c]) == c);
        }
        auto sorted = live;
        t.to_current_sorted(sorted);
        for (std::uint64_t c = 0; c < live.size(); ++c) REQUIRE(sorted[c] == c);
        REQUIRE(t.height() >= 2);
        t.clear();
        REQUIRE(t.size() == 0);
    }
}

TEST_CASE("append to an empty index; n appends of one character") {
    for (auto v : kAll) {
        CAPTURE(variant_name(v));
        BlockStore store(small_config());
        DynamicIndex d({}, 4, store, v);
        d.append(2);
        REQUIRE(positions(d.range_query(2, 2)) == std::vector<std::uint64_t>{0});
        for (int i = 1; i < 500; ++i) d.append(2);
        const auto got = positions(d.range_query(0, 3));
        REQUIRE(got.size() == 500);
        for (std::uint64_t i = 0; i < 500; ++i) REQUIRE(got[i] == i);
        REQUIRE(d.range_query(0, 1).cardinality() == 0);
        d.check_invariants();
        REQUIRE_THROWS_AS(d.append(4), Error);
    }
}

TEST_CASE("random appends interleaved with queries match the oracle") {
    for (auto v : kAll) {
        CAPTURE(variant_name(v));
        BlockStore store(small_config());
        std::mt19937_64 rng(3);
        const std::uint32_t sigma = 16;
        auto s = random_string(rng, 300, sigma);
        DynamicIndex d(s, sigma, store, v);
        d.check_invariants();
        for (int step = 0; step < 10000; ++step) {
            const auto c = static_cast<std::uint32_t>(rng() % sigma);
            d.append(c);
            s.push_back(c);
            if (step % 97 == 0) {
                std::uint32_t lo = static_cast<std::uint32_t>(rng() % sigma), hi = static_cast<std::uint32_t>(rng() % sigma);
                if (lo > hi) std::swap(lo, hi);
                expect_matches(d, s, lo, hi);
            }
            if (step % 1999 == 0) d.check_invariants();
        }
        d.check_invariants();
        REQUIRE(d.peek_string() == s);
        REQUIRE(d.memory_bits() <= store.config().memory_bits);
    }
}

TEST_CASE("buffered append: a single append without flush costs no I/O and is visible") {
    BlockStore store(small_config());
    std::mt19937_64 rng(8);
    const auto s = random_string(rng, 2000, 8);
    DynamicIndex d(s, 8, store, DynamicVariant::kBufferedAppend);
    const auto before = store.snapshot();
    d.append(5);
    REQUIRE(store.snapshot().total() == before.total());
    auto with = s;
    with.push_back(5);
    expect_matches(d, with, 5, 5);
}

TEST_CASE("cross-variant equivalence on an append workload") {
    std::mt19937_64 rng(21);
    const auto base = random_string(rng, 1000, 32);
    std::vector<std::uint32_t> ops(5000);
    for (auto& c : ops) c = static_cast<std::uint32_t>(rng() % 32);
    std::vector<std::vector<std::uint64_t>> answers;
    for (auto v : kAll) {
        BlockStore store(small_config());
        DynamicIndex d(base, 32, store, v);
        for (auto c : ops) d.append(c);
        std::vector<std::uint64_t> all;
        for (std::uint32_t lo = 0; lo < 32; lo += 5) {
            const auto p = positions(d.range_query(lo, std::min<std::uint32_t>(31, lo + 6)));
            all.insert(all.end(), p.begin(), p.end());
        }
        answers.push_back(all);
    }
    REQUIRE(answers[0] == answers[1]);
    REQUIRE(answers[1] == answers[2]);
}

TEST_CASE("rebuild guard, weights after rebuild, forced rebuild keeps answers") {
    for (auto v : kAll) {
        CAPTURE(variant_name(v));
        BlockStore store(small_config());
        std::mt19937_64 rng(4);
        auto s = random_string(rng, 5000, 20);
        DynamicIndex d(s, 20, store, v);
        REQUIRE_FALSE(d.rebuild_if_unbalanced(d.root()));
        for (int i = 0; i < 3000; ++i) {
            s.push_back(static_cast<std::uint32_t>(rng() % 20));
            d.append(s.back());
        }
        const auto nodes = d.nodes();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].parent < -1) continue;
            std::uint64_t p = 1;
            for (unsigned k = 0; k < nodes[i].level; ++k) p *= DynamicIndex::kBranching;
            if (i != d.root()) REQUIRE(2 * nodes[i].weight >= p);
            REQUIRE(nodes[i].weight <= 2 * p);
        }
        std::vector<std::vector<std::uint64_t>> before;
        for (std::uint32_t c = 0; c < 20; c += 3) before.push_back(positions(d.range_query(c, std::min(19u, c + 4))));
        std::size_t internal = d.root();
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].parent == static_cast<std::int64_t>(d.root()) && !nodes[i].leaf) internal = i;
        const auto rebuilds = d.stats().rebuilds;
        d.force_rebuild(internal);
        REQUIRE(d.stats().rebuilds + d.stats().global_rebuilds > rebuilds);
        d.force_rebuild(d.root());
        d.check_invariants();
        std::size_t k = 0;
        for (std::uint32_t c = 0; c < 20; c += 3) REQUIRE(positions(d.range_query(c, std::min(19u, c + 4))) == before[k++]);
    }
}

TEST_CASE("change examples") {
    BlockStore store(small_config());
    std::mt19937_64 rng(9);
    auto s = random_string(rng, 800, 10);
    DynamicIndex d(s, 10, store, DynamicVariant::kFullyDynamic);
    d.change(5, s[5]);
    expect_matches(d, s, 0, 9);
    for (std::uint64_t i = 0; i < s.size(); ++i) d.change(i, 3);
    d.check_invariants();
    std::vector<std::uint64_t> all(s.size());
    for (std::uint64_t i = 0; i < s.size(); ++i) all[i] = i;
    REQUIRE(positions(d.range_query(3, 3)) == all);
    REQUIRE(d.range_query(0, 2).cardinality() == 0);
    REQUIRE(d.range_query(4, 9).cardinality() == 0);
    REQUIRE_THROWS_AS(d.change(s.size(), 1), Error);
}

TEST_CASE("random changes and deletes interleaved with queries") {
    BlockStore store(small_config());
    std::mt19937_64 rng(10);
    const std::uint32_t sigma = 12;
    auto s = random_string(rng, 2000, sigma);
    DynamicIndex d(s, sigma, store, DynamicVariant::kFullyDynamic);
    for (int step = 0; step < 10000; ++step) {
        const int kind = static_cast<int>(rng() % 10);
        if (kind < 5 && !s.empty()) {
            const std::uint64_t i = rng() % s.size();
            const auto c = static_cast<std::uint32_t>(rng() % sigma);
            d.change(i, c);
            s[i] = c;
        } else if (kind < 8 && !s.empty()) {
            const std::uint64_t i = rng() % s.size();
            d.erase(i);
            s.erase(s.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            const auto c = static_cast<std::uint32_t>(rng() % sigma);
            d.append(c);
            s.push_back(c);
        }
        if (step % 61 == 0) {
            std::uint32_t lo = static_cast<std::uint32_t>(rng() % sigma), hi = static_cast<std::uint32_t>(rng() % sigma);
            if (lo > hi) std::swap(lo, hi);
            expect_matches(d, s, lo, hi);
        }
        if (step % 1500 == 0) d.check_invariants();
    }
    d.check_invariants();
    REQUIRE(d.peek_string() == s);
    REQUIRE(d.stats().compactions >= 1);
}

TEST_CASE("delete examples") {
    BlockStore store(small_config());
    std::vector<std::uint32_t> s{0, 1, 2, 3, 1};
    DynamicIndex d(s, 4, store, DynamicVariant::kFullyDynamic);
    d.erase(2);
    s.erase(s.begin() + 2);
    expect_matches(d, s, 0, 3);
    REQUIRE(d.deletions()->to_original(2) == 3);
    while (d.size() > 0) d.erase(0);
    REQUIRE(d.range_query(0, 3).cardinality() == 0);
    REQUIRE(d.count_range(0, 3) == 0);
    REQUIRE_THROWS_AS(d.erase(0), Error);
    d.append(1);
    REQUIRE(positions(d.range_query(1, 1)) == std::vector<std::uint64_t>{0});
    d.check_invariants();
}

TEST_CASE("append-only variants reject change and delete") {
    for (auto v : {DynamicVariant::kDirectAppend, DynamicVariant::kBufferedAppend}) {
        BlockStore store(small_config());
        DynamicIndex d(std::vector<std::uint32_t>{1, 2}, 4, store, v);
        try {
            d.change(0, 1);
            FAIL("expected an error");
        } catch (const Error& e) {
            REQUIRE(e.code() == ErrorCode::kUnsupported);
        }
        REQUIRE_THROWS_AS(d.erase(0), Error);
    }
}

TEST_CASE("direct append keeps the directory consistent and uses it") {
    BlockStore store(small_config());
    std::mt19937_64 rng(12);
    auto s = random_string(rng, 3000, 6);
    DynamicIndex d(s, 6, store, DynamicVariant::kDirectAppend);
    for (int i = 0; i < 4000; ++i) {
        d.append(static_cast<std::uint32_t>(rng() % 6));
        if (i % 500 == 0) {
            REQUIRE(d.directory().consistent());
            d.check_invariants();
        }
    }
    for (std::uint32_t c = 0; c < 6; ++c) REQUIRE(d.directory().get(c, 0).has_value());
}

TEST_CASE("approximate queries on a dynamic index have no false negatives") {
    BlockStore store(small_config());
    std::mt19937_64 rng(13);
    auto s = random_string(rng, 5000, 64);
    DynamicIndex d(s, 64, store, DynamicVariant::kFullyDynamic, 77);
    for (int i = 0; i < 300; ++i) d.erase(rng() % d.size());
    s = d.peek_string();
    const auto r = d.approx_query(3, 4, 0.1);
    for (auto p : brute_range(s, 3, 4)) REQUIRE(r.contains(p));
    REQUIRE(r.n() == s.size());
}

TEST_CASE("variant names round-trip") {
    for (auto v : kAll) REQUIRE(parse_variant(variant_name(v)) == v);
    REQUIRE_FALSE(parse_variant("static"));
}
