#pragma once

// Multi-resolution bitmap index over a complete binary tree on the alphabet.
// Every node stores the compressed bitmap of the occurrences of the
// characters below it; a range query merges the canonical cover of the range,
// or the cover of its complement when the answer holds more than n/2 positions.

#include <cstdint>
#include <span>
#include <vector>

#include "rangeindex/bitcodec.hpp"
#include "rangeindex/iomodel.hpp"
#include "rangeindex/manifest.hpp"

namespace rix {

enum class ComplementMode { kAuto, kNever, kAlways };

struct TreeNodeRef {
    unsigned level = 0;    // 0 is the root
    std::uint64_t index = 0;  // left-to-right within the level

    friend bool operator==(const TreeNodeRef&, const TreeNodeRef&) = default;
};

struct UniformQueryTrace {
    bool used_complement = false;
    std::vector<TreeNodeRef> nodes_read;
    std::uint64_t data_bits_read = 0;
};

class UniformIndex {
public:
    static UniformIndex build(std::span<const std::uint32_t> x, std::uint32_t sigma, BlockStore& store);
    static UniformIndex open(BlockStore& store, const Manifest& manifest);
    void describe(Manifest& manifest) const;

    std::uint64_t size() const noexcept { return n_; }
    std::uint32_t sigma() const noexcept { return sigma_; }
    std::uint32_t padded_sigma() const noexcept { return padded_sigma_; }
    unsigned height() const noexcept { return height_; }
    // A[0..sigma]: A[i] is the number of positions holding a character < i.
    const std::vector<std::uint64_t>& prefix_counts() const noexcept { return prefix_; }

    std::uint64_t count_range(std::uint32_t lo, std::uint32_t hi) const;
    CompressedBitmap range_query(std::uint32_t lo, std::uint32_t hi, UniformQueryTrace* trace = nullptr);

    // Maximal subtrees whose leaves lie inside [lo, hi], left to right.
    std::vector<TreeNodeRef> cover(std::uint32_t lo, std::uint32_t hi) const;

    void set_complement_mode(ComplementMode mode) noexcept { mode_ = mode; }

    // Uncharged; for invariant checks.
    CompressedBitmap peek_node(TreeNodeRef node) const;
    std::uint64_t node_cardinality(TreeNodeRef node) const;
    std::uint64_t data_bits() const noexcept;
    std::uint64_t directory_bits() const noexcept;

private:
    struct DirEntry {
        std::uint64_t offset = 0;  // global bit offset in the store
        std::uint64_t length = 0;  // payload bits
        std::uint64_t card = 0;
    };

    UniformIndex(BlockStore& store) : store_(&store) {}
    void check_range(std::uint32_t lo, std::uint32_t hi) const;
    void cover_into(std::uint32_t lo, std::uint32_t hi, std::vector<TreeNodeRef>& out) const;
    // Charges the cover's reads and adds a cursor per non-empty node.
    void open_cover(std::uint32_t lo, std::uint32_t hi, UniformQueryTrace* trace);
    const DirEntry& entry(TreeNodeRef node) const;

    BlockStore* store_;
    std::uint64_t n_ = 0;
    std::uint32_t sigma_ = 0;
    std::uint32_t padded_sigma_ = 1;
    unsigned height_ = 0;
    std::vector<std::uint64_t> prefix_;
    std::vector<std::vector<DirEntry>> levels_;
    std::uint64_t dir_offset_ = 0;
    ComplementMode mode_ = ComplementMode::kAuto;

    // Reused across queries.
    std::vector<TreeNodeRef> nodes_;
    std::vector<GapCursor> cursors_;
};

}  // namespace rix
