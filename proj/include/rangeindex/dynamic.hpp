#pragma once

// Update machinery: a B-tree of compressed bitmaps with per-node update
// buffers (BufferedBitmapIndex), the deleted-position tree used to translate
// between current and original positions, and DynamicIndex, which keeps a
// weight-balanced tree over the occurrences in memory and one bitmap store
// per materialized depth on the device.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rangeindex/approx.hpp"
#include "rangeindex/bitcodec.hpp"
#include "rangeindex/iomodel.hpp"

namespace rix {

// Block allocator with reuse on top of a BlockStore.
class BlockPool {
public:
    explicit BlockPool(BlockStore& store) : store_(&store) {}
    BlockAddr allocate();
    void release(BlockAddr a) { free_.push_back(a); }
    std::uint64_t live_blocks() const noexcept { return store_->block_count() - free_.size(); }
    BlockStore& store() const noexcept { return *store_; }

private:
    BlockStore* store_;
    std::vector<BlockAddr> free_;
};

struct BbiKey {
    std::uint64_t id = 0;
    std::uint64_t pos = 0;
    friend auto operator<=>(const BbiKey&, const BbiKey&) = default;
};

struct BbiRecord {
    std::uint64_t id = 0;
    std::uint64_t pos = 0;
    bool insert = true;
    friend bool operator==(const BbiRecord&, const BbiRecord&) = default;
};

// One bitmap, or a piece of one.
struct BbiSegment {
    std::uint64_t id = 0;
    std::vector<std::uint64_t> positions;  // increasing
    friend bool operator==(const BbiSegment&, const BbiSegment&) = default;
};

// Bitmaps identified by integer ids, concatenated in id order into leaf
// blocks of at most B bits. Every leaf block starts afresh: the first
// position of each piece is absolute. Internal nodes route by (id, position)
// and hold a buffer of pending updates; the root buffer lives in memory.
// With buffer capacity 0 every update goes straight to its leaf.
class BufferedBitmapIndex {
public:
    static constexpr unsigned kFanout = 8;

    // id_bits and pos_bits fix the record width; the buffer capacity is
    // floor(B / record width) records unless `direct`.
    BufferedBitmapIndex(BlockPool& pool, unsigned id_bits, unsigned pos_bits, bool direct);

    // Replaces all content. Segments sorted by id, ids distinct.
    void bulk_load(std::span<const BbiSegment> segments);
    void release_all();

    void update(std::uint64_t id, std::uint64_t pos, bool insert);
    // Direct mode only: applies a batch, one read and write per leaf touched.
    void apply_batch(std::span<const BbiRecord> records);
    // Direct mode only: applies one record to the given leaf block, which
    // must be the one the record routes to.
    void apply_at(BlockAddr leaf, const BbiRecord& record);

    // Up-to-date bitmap of one id.
    CompressedBitmap point_query(std::uint64_t id, std::uint64_t universe);
    // Up-to-date non-empty bitmaps with ids in [a, b), in id order.
    void read_range(std::uint64_t a, std::uint64_t b, std::vector<BbiSegment>& out);
    // Drops every bitmap and pending update with id in [a, b) and stores `segments` instead.
    void replace_range(std::uint64_t a, std::uint64_t b, std::span<const BbiSegment> segments);
    // Pushes every pending update down to the leaves.
    void drain();

    bool direct() const noexcept { return capacity_ == 0; }
    std::uint64_t buffer_capacity() const noexcept { return capacity_; }
    unsigned record_bits() const noexcept { return id_bits_ + pos_bits_ + 2; }
    // Leaf block that (id, pos) routes to. No I/O.
    BlockAddr leaf_for(BbiKey key) const;
    // Called with the address of every leaf whose content moved to another block or was freed.
    void set_observer(std::function<void(BlockAddr)> f) { observer_ = std::move(f); }

    // Uncharged inspection.
    std::vector<BbiSegment> stored() const;
    std::vector<BbiSegment> logical() const;
    std::uint64_t leaf_count() const noexcept;
    std::uint64_t internal_count() const noexcept;
    std::uint64_t pending() const noexcept;
    std::uint64_t height() const noexcept;
    // Encoded bits of the stored bitmaps as single segments, no block padding.
    std::uint64_t exact_bits() const;
    std::uint64_t memory_bits() const noexcept;
    // Throws kPrecondition on a broken structural invariant.
    void check() const;

private:
    struct Node {
        bool leaf = true;
        bool alive = true;
        BlockAddr addr = 0;
        int parent = -1;
        std::vector<int> kids;
        std::vector<BbiKey> keys;  // keys[i]: smallest key routed to kids[i]; keys[0] unused
        std::uint64_t count = 0;   // pending records (internal) or encoded bits (leaf)
    };

    struct LeafSpan {
        int leaf;
        BbiKey lo, hi;
    };

    int new_node(bool leaf);
    void free_node(int id);
    int route(int node, BbiKey key) const;
    int route_to_leaf(BbiKey key) const;
    std::vector<BbiRecord> load_buffer(int node);
    void store_buffer(int node, const std::vector<BbiRecord>& recs);
    std::vector<BbiRecord> peek_buffer(int node) const;
    void flush_records(int node, std::vector<BbiRecord>& recs);
    void drain_node(int node, std::vector<BbiRecord> recs);
    void apply_to_leaf(int leaf, std::span<const BbiRecord> recs);
    std::vector<BbiSegment> read_leaf(int leaf);
    std::vector<BbiSegment> peek_leaf(int leaf) const;
    void write_leaf(int leaf, std::vector<BbiSegment> pieces);
    std::vector<std::vector<BbiSegment>> pack(const std::vector<BbiSegment>& pieces, std::uint64_t limit) const;
    void insert_kid(int parent, int after, int kid, BbiKey key);
    void finish_op();
    void merge_small(int leaf);
    void split_internal(int node);
    void collect(int node, BbiKey lo, BbiKey hi, BbiKey qlo, BbiKey qhi, unsigned depth,
                 std::vector<LeafSpan>& leaves, std::vector<std::pair<unsigned, int>>& internals) const;
    Bitstream encode_leaf(const std::vector<BbiSegment>& pieces) const;
    std::vector<BbiSegment> decode_leaf(const Bitstream& bits, std::uint64_t off) const;
    std::uint64_t leaf_bits(const std::vector<BbiSegment>& pieces) const;
    void notify(BlockAddr addr);
    void check_node(int v, BbiKey lo, BbiKey hi, unsigned depth, unsigned& leaf_depth) const;

    BlockPool* pool_;
    unsigned id_bits_;
    unsigned pos_bits_;
    std::uint64_t capacity_;
    std::vector<Node> nodes_;
    std::vector<int> free_ids_;
    int root_ = -1;
    std::vector<BbiRecord> root_buffer_;
    std::unordered_map<BlockAddr, int> leaf_of_addr_;
    std::vector<int> dirty_;  // leaves that may merge, internals that may split
    std::function<void(BlockAddr)> observer_;
};

// Sorted set of deleted original positions in a B-tree of single-block nodes
// carrying subtree sizes.
class DeletionTree {
public:
    static constexpr std::uint64_t kDeleted = ~std::uint64_t{0};

    explicit DeletionTree(BlockPool& pool);

    void insert(std::uint64_t original);
    bool contains(std::uint64_t original);
    // Number of deleted positions below p.
    std::uint64_t rank(std::uint64_t p);
    std::uint64_t to_original(std::uint64_t current);
    // kDeleted for a deleted position.
    std::uint64_t to_current(std::uint64_t original);
    // In place, for increasing non-deleted positions. One descent plus a walk
    // over the leaves the values span.
    void to_current_sorted(std::vector<std::uint64_t>& positions);

    std::uint64_t size() const noexcept { return size_; }
    unsigned height() const noexcept { return height_; }
    std::uint64_t leaf_capacity() const noexcept;
    std::uint64_t internal_capacity() const noexcept;
    void clear();
    // Uncharged.
    std::vector<std::uint64_t> keys() const;
    void check() const;

private:
    struct Entry {
        std::uint64_t first = 0;
        std::uint64_t count = 0;
        BlockAddr child = 0;
    };
    struct NodeData {
        bool leaf = true;
        std::uint64_t next = 0;  // leaves: address of the following leaf plus one, 0 for none
        std::vector<std::uint64_t> keys;
        std::vector<Entry> entries;
    };
    NodeData read(BlockAddr a);
    NodeData peek(BlockAddr a) const;
    void write(BlockAddr a, const NodeData& d);
    Bitstream encode(const NodeData& d) const;
    NodeData decode(const Bitstream& bits, std::uint64_t off) const;
    // Reads the path to the leaf where p belongs; returns the number of keys
    // in the leaves before it.
    std::uint64_t descend(std::uint64_t p, NodeData& leaf);
    void release(BlockAddr a, bool leaf);

    BlockPool* pool_;
    BlockAddr root_ = 0;
    bool has_root_ = false;
    std::uint64_t size_ = 0;
    unsigned height_ = 0;
};

// Per character and store, the leaf block holding the tail of the bitmap that
// the character's next append goes to.
class LastOccurrenceDirectory {
public:
    void reset(std::uint32_t sigma, unsigned stores);
    void set(std::uint32_t ch, unsigned store, BlockAddr leaf);
    void clear(std::uint32_t ch, unsigned store);
    std::optional<BlockAddr> get(std::uint32_t ch, unsigned store) const;
    // (char, store) pairs pointing at a block.
    std::vector<std::pair<std::uint32_t, unsigned>> back_pointers(BlockAddr leaf) const;
    bool consistent() const;

private:
    static constexpr BlockAddr kNone = ~BlockAddr{0};
    unsigned stores_ = 0;
    std::vector<BlockAddr> fwd_;  // [ch * stores + store]
    std::unordered_map<BlockAddr, std::vector<std::pair<std::uint32_t, unsigned>>> back_;
};

enum class DynamicVariant { kDirectAppend, kBufferedAppend, kFullyDynamic };

const char* variant_name(DynamicVariant v) noexcept;
std::optional<DynamicVariant> parse_variant(const std::string& s);

struct DynamicStats {
    std::uint64_t updates = 0;
    std::uint64_t update_io = 0;  // block reads and writes charged to updates
    std::uint64_t rebuilds = 0;
    std::uint64_t rebuild_io = 0;
    std::uint64_t rebuilt_weight = 0;  // occurrences below rebuilt nodes
    std::uint64_t global_rebuilds = 0;
    std::uint64_t compactions = 0;
    std::uint64_t flushes = 0;
};

struct DynamicNodeView {
    unsigned level = 0;
    unsigned depth = 0;
    std::uint64_t weight = 0;
    bool leaf = false;
    std::int64_t parent = -1;
    std::uint64_t sep = 0;
    std::uint64_t hi = 0;
};

class DynamicIndex {
public:
    static constexpr unsigned kBranching = 8;
    static constexpr unsigned kPosBits = 32;

    DynamicIndex(std::span<const std::uint32_t> x, std::uint32_t sigma, BlockStore& store,
                 DynamicVariant variant, std::uint64_t seed = 1);
    DynamicIndex(const DynamicIndex&) = delete;
    DynamicIndex& operator=(const DynamicIndex&) = delete;

    DynamicVariant variant() const noexcept { return variant_; }
    std::uint32_t sigma() const noexcept { return sigma_; }
    std::uint32_t sentinel() const noexcept { return sigma_; }
    // Current length.
    std::uint64_t size() const noexcept { return total_ - (deletions_ ? deletions_->size() : 0); }
    std::uint64_t seed() const noexcept { return seed_; }
    BlockStore& store() const noexcept { return pool_.store(); }

    void append(std::uint32_t ch);
    void change(std::uint64_t i, std::uint32_t ch);
    void erase(std::uint64_t i);

    std::uint64_t count_range(std::uint32_t lo, std::uint32_t hi);
    CompressedBitmap range_query(std::uint32_t lo, std::uint32_t hi);
    ApproxResult approx_query(std::uint32_t lo, std::uint32_t hi, double eps);

    // Rebuilds the subtree under a node if a child of it violates the weight
    // bounds; returns whether it did.
    bool rebuild_if_unbalanced(std::size_t node);
    void force_rebuild(std::size_t node);
    void drain();

    // Uncharged inspection.
    std::vector<DynamicNodeView> nodes() const;
    std::size_t root() const noexcept { return static_cast<std::size_t>(root_); }
    unsigned height() const noexcept { return height_; }
    std::vector<unsigned> materialized_depths() const { return store_depths_; }
    const std::vector<BufferedBitmapIndex>& stores() const noexcept { return stores_; }
    const LastOccurrenceDirectory& directory() const noexcept { return directory_; }
    DeletionTree* deletions() noexcept { return deletions_ ? &*deletions_ : nullptr; }
    const DynamicStats& stats() const noexcept { return stats_; }
    std::uint64_t memory_bits() const noexcept;
    std::uint64_t space_bits() const noexcept;
    // The current string, read without charge from the stores and buffers.
    std::vector<std::uint32_t> peek_string() const;
    // Checks weights, balance, pruning-independent routing, the directory,
    // and that every stored bitmap plus the updates pending above it equals
    // the occurrences in the node's key range. Throws kPrecondition.
    void check_invariants() const;

private:
    struct WNode {
        std::uint64_t sep = 0;  // smallest key routed here
        std::uint64_t hi = 0;   // first key past the node
        unsigned level = 0;
        std::uint64_t weight = 0;
        int parent = -1;
        std::vector<int> kids;
        bool leaf = true;
        std::uint32_t ch = 0;  // leaves with weight > 0
        std::uint64_t key0 = 0;  // level-0 leaves: the occurrence they hold
        bool alive = true;
        // buffered-append
        std::uint64_t buf_count = 0;
        std::optional<BlockAddr> buf_addr;
    };

    static std::uint64_t make_key(std::uint32_t ch, std::uint64_t pos) noexcept {
        return (std::uint64_t{ch} << kPosBits) | pos;
    }
    static std::uint32_t key_char(std::uint64_t key) noexcept { return static_cast<std::uint32_t>(key >> kPosBits); }
    static std::uint64_t key_pos(std::uint64_t key) noexcept { return key & ((std::uint64_t{1} << kPosBits) - 1); }

    WNode& node(int v) { return nodes_[static_cast<std::size_t>(v)]; }
    const WNode& node(int v) const { return nodes_[static_cast<std::size_t>(v)]; }
    unsigned depth(int v) const noexcept { return height_ - nodes_[static_cast<std::size_t>(v)].level; }
    // First materialized depth >= d, as a store index.
    unsigned store_for_depth(unsigned d) const;
    int store_of(int v) const;  // -1 when the node has no bitmap of its own
    // Node of `path` (root to leaf) whose bitmap in store s holds the leaf's keys; -1 if none.
    int frontier_in(const std::vector<int>& path, unsigned s) const;
    bool in_bounds(int v) const;
    int new_wnode();
    void free_subtree(int v, bool keep_root);
    std::vector<int> path_to(std::uint64_t key) const;
    int route(int v, std::uint64_t key) const;
    void collect_leaves(int v, std::vector<int>& out) const;
    void collect_frontier(int v, unsigned s, std::vector<int>& out) const;

    void set_height(unsigned h);
    void global_rebuild(std::vector<std::uint64_t> keys);
    void build_subtree(int u, std::span<const std::uint64_t> keys);
    void rebuild(int u, std::span<const std::uint64_t> extra);
    std::vector<std::uint64_t> gather_keys(int u);
    std::vector<BbiSegment> segments_for(int u, unsigned s, std::span<const std::uint64_t> keys) const;
    void check_path(std::uint64_t key);
    void refresh_directory();
    void refresh_directory_entry(std::uint32_t ch);
    void on_leaf_moved(BlockAddr a);

    void insert_occ(std::uint32_t ch, std::uint64_t pos);
    void delete_occ(std::uint32_t ch, std::uint64_t pos);
    // Inserts or deletes pos in the bitmap of every frontier node on the
    // path whose store depth is below `below_depth`.
    void store_update(const std::vector<int>& path, std::uint64_t pos, bool insert, unsigned below_depth,
                      bool use_directory);

    // buffered-append
    unsigned wrecord_bits() const noexcept;
    std::uint64_t wcapacity() const noexcept;
    std::vector<std::uint64_t> load_wbuffer(int v);
    std::vector<std::uint64_t> peek_wbuffer(int v) const;
    void store_wbuffer(int v, const std::vector<std::uint64_t>& keys);
    void wflush(int v, std::vector<std::uint64_t>& keys);
    void deliver(int v, std::vector<std::uint64_t> keys);
    bool explicit_node(int v) const;

    void decompose(int v, std::uint64_t lo, std::uint64_t hi, std::vector<int>& out) const;
    std::vector<std::uint64_t> query_original(std::uint32_t lo, std::uint32_t hi);
    std::vector<std::uint64_t> peek_keys() const;
    void check_range(std::uint32_t lo, std::uint32_t hi) const;
    void check_char(std::uint32_t ch) const;
    void maybe_compact();
    void begin_update();
    void end_update();

    // column (fully-dynamic), original coordinates
    std::uint64_t column_per_block() const noexcept;
    std::uint32_t column_get(std::uint64_t orig);
    void column_set(std::uint64_t orig, std::uint32_t ch);
    std::uint32_t column_peek(std::uint64_t orig) const;
    void column_reset(std::span<const std::uint32_t> x);

    mutable BlockPool pool_;
    DynamicVariant variant_;
    std::uint32_t sigma_;
    std::uint64_t seed_;
    std::uint64_t total_ = 0;  // positions assigned since the last compaction
    unsigned height_ = 0;
    std::vector<WNode> nodes_;
    std::vector<int> free_nodes_;
    int root_ = -1;
    std::vector<unsigned> store_depths_;
    std::vector<BufferedBitmapIndex> stores_;
    std::vector<std::uint64_t> root_wbuffer_;
    LastOccurrenceDirectory directory_;
    std::vector<std::uint64_t> last_pos_;  // per character, direct-append only; ~0 for none
    std::vector<std::uint32_t> dir_dirty_;
    std::optional<DeletionTree> deletions_;
    std::vector<BlockAddr> column_blocks_;
    unsigned column_width_ = 1;
    DynamicStats stats_;
    IOStats op_start_;
    unsigned update_depth_ = 0;
};

}  // namespace rix
