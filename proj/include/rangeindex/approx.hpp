#pragma once

// Approximate range queries. Every stored entry of a WbbIndex also gets k
// hashed copies: for j = 1..k the set h_j(S), where a position i is split
// into its low 2^j bits i2 and the rest i1, and h_j(i) = g_j(i1) xor i2.
// A query with false positive rate eps picks the smallest j with
// 2^(2^j) > z / eps and returns the union of the level-j hashed sets of the
// selected nodes. The answer is the preimage of that union.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rangeindex/bitcodec.hpp"
#include "rangeindex/manifest.hpp"
#include "rangeindex/wbb_index.hpp"

namespace rix {

// floor(lg lg n), 0 when n < 4.
unsigned hash_level_count(std::uint64_t n) noexcept;

class HashFamily {
public:
    HashFamily() = default;
    // k = hash_level_count(n); each g_j is seeded from `seed`.
    static HashFamily create(std::uint64_t n, std::uint64_t seed);

    unsigned k() const noexcept { return static_cast<unsigned>(levels_.size()); }
    std::uint64_t n() const noexcept { return n_; }
    std::uint64_t seed() const noexcept { return seed_; }

    // 2^j, the output width of g_j and h_j.
    static unsigned width(unsigned j) noexcept { return 1u << j; }
    // 2^(2^j), the universe of level j.
    static std::uint64_t universe(unsigned j) noexcept;

    // Multiply-add-shift on 128 bits, keeping the top 2^j bits.
    std::uint64_t g(unsigned j, std::uint64_t i1) const;
    std::uint64_t h(unsigned j, std::uint64_t i) const;

    void describe(Manifest& m, const std::string& prefix) const;
    static HashFamily open(const Manifest& m, const std::string& prefix);

    friend bool operator==(const HashFamily&, const HashFamily&) = default;

private:
    struct Params {
        std::uint64_t a_hi = 0, a_lo = 0, b_hi = 0, b_lo = 0;
        friend bool operator==(const Params&, const Params&) = default;
    };
    std::uint64_t n_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<Params> levels_;  // levels_[j - 1]
};

// Smallest j >= 1 with 2^(2^j) > z / eps, or nullopt when z == 0 or j > k
// (the query is then answered exactly). Throws kInvalidArgument unless
// 0 < eps <= 1.
std::optional<unsigned> select_level(std::uint64_t z, double eps, unsigned k);

class PreimageCursor;

class ApproxResult {
public:
    // Exact answer.
    explicit ApproxResult(CompressedBitmap exact);
    // Hashed answer at level j.
    ApproxResult(CompressedBitmap hashed, unsigned j, const HashFamily& family);

    bool exact() const noexcept { return !level_; }
    std::optional<unsigned> level() const noexcept { return level_; }
    std::uint64_t n() const noexcept { return n_; }
    // The exact set, or h_j of it.
    const CompressedBitmap& set() const noexcept { return set_; }
    const HashFamily& family() const noexcept { return family_; }

    bool contains(std::uint64_t i) const;
    // Members in increasing order, computed without I/O.
    PreimageCursor members() const;

private:
    friend class PreimageCursor;

    std::uint64_t n_ = 0;
    std::optional<unsigned> level_;
    CompressedBitmap set_;
    HashFamily family_;
    std::vector<std::uint64_t> decoded_;  // set_ held in memory for membership tests
};

class PreimageCursor {
public:
    explicit PreimageCursor(const ApproxResult& r);
    std::optional<std::uint64_t> next();

private:
    void fill_block();

    const ApproxResult* r_;
    std::uint64_t block_ = 0;  // current i1
    std::uint64_t blocks_ = 0;
    std::vector<std::uint64_t> buf_;
    std::size_t at_ = 0;
};

// Positions contained in every result, increasing. Throws kInvalidArgument
// when the results disagree on n or the list is empty.
class IntersectCursor {
public:
    explicit IntersectCursor(std::span<const ApproxResult> results);
    std::optional<std::uint64_t> next();

private:
    std::vector<const ApproxResult*> others_;
    std::optional<PreimageCursor> driver_;
};

IntersectCursor intersect_approx(std::span<const ApproxResult> results);
std::vector<std::uint64_t> collect(PreimageCursor cursor);
std::vector<std::uint64_t> collect(IntersectCursor cursor);

struct ApproxTrace {
    std::uint64_t z = 0;
    std::optional<unsigned> level;
    std::uint64_t set_bits_read = 0;  // hashed or exact set data decoded
    std::uint64_t reads = 0;           // all block reads of the query
    std::size_t chunks = 0;
};

struct HashedStoreInfo {
    unsigned store = 0;
    unsigned j = 0;
    std::uint64_t base = 0;  // global bit offset of the hashed entries
    std::uint64_t bits = 0;
    std::uint64_t dir_base = 0;  // one offset per entry, plus the end
    unsigned dir_width = 1;
};

class ApproxIndex {
public:
    // Writes the hashed stores after the index's existing regions.
    static ApproxIndex build(WbbIndex& idx, const HashFamily& family);
    static ApproxIndex open(WbbIndex& idx, const Manifest& manifest);
    void describe(Manifest& manifest) const;

    const HashFamily& family() const noexcept { return family_; }
    const std::vector<HashedStoreInfo>& hashed_stores() const noexcept { return hashed_; }
    WbbIndex& index() const noexcept { return *idx_; }

    ApproxResult query(std::uint32_t lo, std::uint32_t hi, double eps, ApproxTrace* trace = nullptr);

    // Uncharged: the decoded level-j hashed sets of one store, in entry order.
    std::vector<std::vector<std::uint64_t>> peek_hashed_entries(unsigned store, unsigned j) const;
    // Uncharged: encoded size in bits of every hashed entry of one store.
    std::vector<std::uint64_t> hashed_entry_bits(unsigned store, unsigned j) const;
    std::uint64_t total_hashed_bits() const noexcept;

private:
    explicit ApproxIndex(WbbIndex& idx) : idx_(&idx) {}
    const HashedStoreInfo& hashed(unsigned store, unsigned j) const;

    WbbIndex* idx_;
    HashFamily family_;
    std::vector<HashedStoreInfo> hashed_;  // store-major, j = 1..k
};

}  // namespace rix
