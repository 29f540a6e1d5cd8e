#pragma once

// Pruned weight-balanced tree over the occurrences of a string, sorted by
// (character, position). Nodes whose occurrences all share one character are
// leaves. Bitmaps are stored only at depths 1, 2, 4, ... and at the deepest
// level; the bitmap of any other node is the union of its nearest stored
// descendants.
//
// Store D holds, in left-to-right order, the nodes at depth D together with
// the leaves lying strictly between the previous stored depth and D. Every
// leaf is therefore stored exactly once, and a node's bitmap is one
// contiguous run of entries in the first store at or below its depth.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rangeindex/bitcodec.hpp"
#include "rangeindex/iomodel.hpp"
#include "rangeindex/manifest.hpp"
#include "rangeindex/uniform_index.hpp"

namespace rix {

// One child slot of a node page. Characters are internal ids.
struct WbbEntry {
    std::uint32_t min_char = 0;
    std::uint32_t max_char = 0;
    std::uint64_t weight = 0;
    std::uint64_t chunk_off = 0;   // bit offset of the node's run within its store
    std::uint64_t entry_first = 0;  // index of the first entry of the run
    std::uint64_t entry_count = 0;
    std::uint64_t child_page = 0;   // bit offset within the tree region; unused for leaves
    bool is_leaf = false;

    friend bool operator==(const WbbEntry&, const WbbEntry&) = default;
};

struct WbbSelected {
    WbbEntry entry;
    unsigned depth = 0;
    unsigned store = 0;  // index into materialized_depths()
};

// A contiguous run of entries in one store.
struct WbbChunk {
    unsigned store = 0;
    std::uint64_t off = 0;  // global bit offset
    std::uint64_t entry_first = 0;
    std::uint64_t entry_count = 0;
};

struct WbbQueryTrace {
    bool used_complement = false;
    std::size_t selected_nodes = 0;
    std::uint64_t nav_reads = 0;
    std::uint64_t data_reads = 0;
    std::uint64_t data_bits_read = 0;
    std::vector<WbbChunk> chunks;
};

struct WbbStoreInfo {
    unsigned depth = 0;
    std::uint64_t base = 0;  // global bit offset
    std::uint64_t bits = 0;
    std::uint64_t entries = 0;
};

struct WbbSpaceReport {
    std::vector<std::uint64_t> store_bits;  // per materialized depth
    std::uint64_t tree_bits = 0;
    std::uint64_t total_bits = 0;
    std::uint64_t node_count = 0;
    double h0 = 0;  // empirical entropy, bits per character
};

// Uncharged view of one node for invariant checks.
struct WbbNodeView {
    WbbEntry entry;
    unsigned depth = 0;
    std::int64_t parent = -1;
    std::vector<std::size_t> children;
};

// Blocks already fetched during one operation. Reading a block through the
// cache twice charges it once.
class NavCache {
public:
    explicit NavCache(BlockStore& store) : store_(&store) {}
    // Charges the blocks under [off, off + len) not yet read and returns the
    // store contents to decode them from.
    const Bitstream& view(std::uint64_t off, std::uint64_t len);
    std::uint64_t reads() const noexcept { return count_; }

private:
    bool seen(BlockAddr a) const;

    static constexpr std::size_t kInline = 16;
    BlockStore* store_;
    std::array<BlockAddr, kInline> recent_{};
    std::size_t count_ = 0;
    std::vector<BlockAddr> more_;  // past the first kInline blocks, sorted
};

class WbbIndex {
public:
    static constexpr unsigned kBranching = 8;  // c

    static WbbIndex build(std::span<const std::uint32_t> x, std::uint32_t sigma, BlockStore& store);
    static WbbIndex open(BlockStore& store, const Manifest& manifest);
    void describe(Manifest& manifest) const;

    std::uint64_t size() const noexcept { return n_; }
    std::uint32_t sigma() const noexcept { return sigma_; }
    std::uint32_t internal_sigma() const noexcept { return sigma_ + (split_char_ ? 1 : 0); }
    std::optional<std::uint32_t> split_char() const noexcept { return split_char_; }
    // Levels of the unpruned tree above the occurrences.
    unsigned levels() const noexcept { return levels_; }
    // Depth of the deepest leaf of the pruned tree.
    unsigned height() const noexcept { return height_; }
    const std::vector<WbbStoreInfo>& stores() const noexcept { return stores_; }
    std::vector<unsigned> materialized_depths() const;
    BlockStore& store() const noexcept { return *store_; }

    // Internal character range for a range over the public alphabet.
    std::pair<std::uint32_t, std::uint32_t> to_internal(std::uint32_t lo, std::uint32_t hi) const;

    // Maximal subtrees inside the range, left to right. Charges navigation.
    std::vector<WbbSelected> decompose_range(std::uint32_t lo, std::uint32_t hi);
    std::vector<WbbSelected> decompose_internal(std::uint32_t l, std::uint32_t r, NavCache& cache) const;
    // Coalesced runs to read for a set of selected nodes, ordered by store then offset.
    std::vector<WbbChunk> plan_chunks(std::span<const WbbSelected> selected) const;

    std::uint64_t count_range(std::uint32_t lo, std::uint32_t hi);
    CompressedBitmap range_query(std::uint32_t lo, std::uint32_t hi, WbbQueryTrace* trace = nullptr);
    void set_complement_mode(ComplementMode mode) noexcept { mode_ = mode; }

    // Decodes consecutive entries of a chunk read from a store.
    static void decode_entries(BlockScanner& scan, std::uint64_t count, std::vector<std::uint64_t>& out);

    // Uncharged helpers.
    std::vector<WbbNodeView> walk() const;
    std::vector<std::vector<std::uint64_t>> peek_store_entries(unsigned store) const;
    WbbSpaceReport space_report() const;
    const WbbEntry& root() const noexcept { return root_; }

private:
    struct Widths {
        unsigned ch = 1, off = 1, entry = 1, page = 1;
    };
    // Field widths of the slots in one page.
    struct PageFormat {
        bool relative = false;
        unsigned weight = 1, off = 1, first = 1, count = 1;
        unsigned leaf_bits = 0, node_bits = 0;  // slot sizes
    };

    explicit WbbIndex(BlockStore& store) : store_(&store) {}
    PageFormat page_format(const WbbEntry& parent, unsigned depth, unsigned rel_off) const;
    void write_entry(Bitstream& out, const WbbEntry& e, const WbbEntry& parent, const PageFormat& f) const;
    WbbEntry read_slot(const Bitstream& bits, std::uint64_t& pos, std::uint64_t end, const PageFormat& f,
                       const WbbEntry& parent) const;
    std::uint64_t check_page(const Bitstream& bits, std::uint64_t start, std::uint64_t len) const;
    void parse_page(const Bitstream& bits, std::uint64_t start, std::uint64_t len, const WbbEntry& parent,
                    unsigned depth, std::vector<WbbEntry>& out) const;
    void visit(const WbbEntry& e, unsigned depth, std::uint32_t l, std::uint32_t r, NavCache& cache,
               std::vector<WbbSelected>& out) const;
    void index_store_depths();
    unsigned store_for_depth(unsigned depth) const;
    void plan_chunks_into(std::span<const WbbSelected> selected, std::vector<WbbChunk>& out) const;
    // Leaves the sorted positions in scratch_.positions.
    void read_selected(std::span<const WbbSelected> selected, WbbQueryTrace* trace);

    BlockStore* store_;
    std::uint64_t n_ = 0;
    std::uint32_t sigma_ = 0;
    std::optional<std::uint32_t> split_char_;
    unsigned levels_ = 0;
    unsigned height_ = 0;
    std::vector<WbbStoreInfo> stores_;
    std::vector<unsigned> store_of_depth_;
    std::uint64_t tree_off_ = 0;
    std::uint64_t tree_bits_ = 0;
    std::uint64_t node_count_ = 0;
    Widths widths_;
    WbbEntry root_;
    std::vector<std::uint64_t> char_counts_;  // public alphabet, for the space report only
    ComplementMode mode_ = ComplementMode::kAuto;

    // Buffers reused across queries.
    struct Scratch {
        std::vector<WbbSelected> selected;
        std::vector<WbbChunk> chunks;
        std::vector<std::uint64_t> positions;
    };
    Scratch scratch_;
};

}  // namespace rix
