#include "rangeindex/wbb_index.hpp"

#include <algorithm>
#include <cmath>

#include "rangeindex/errors.hpp"

namespace rix {

namespace {

struct BuildNode {
    std::uint64_t begin = 0;  // first occurrence in sorted order
    std::uint64_t weight = 0;
    std::uint32_t min_char = 0;
    std::uint32_t max_char = 0;
    std::uint64_t first_child = 0;
    std::uint32_t child_count = 0;
};

struct PrunedNode {
    unsigned level = 0;
    std::uint64_t index = 0;
    unsigned depth = 0;
    bool leaf = false;
    std::size_t child_begin = 0;  // into the shared child list
    std::size_t child_end = 0;
};

// A page starts with its own length in bits and the width of the relative
// offsets it holds.
constexpr unsigned kPageHeaderBits = 16;
constexpr unsigned kRelWidthBits = 6;

// Groups the nodes of one level greedily: a group closes once its weight
// reaches `target`, and a trailing group lighter than target/2 joins its
// predecessor.
std::vector<BuildNode> group_level(const std::vector<BuildNode>& below, std::uint64_t target) {
    std::vector<BuildNode> out;
    BuildNode cur;
    bool open = false;
    for (std::uint64_t j = 0; j < below.size(); ++j) {
        const BuildNode& ch = below[j];
        if (!open) {
            cur = BuildNode{ch.begin, 0, ch.min_char, ch.max_char, j, 0};
            open = true;
        }
        cur.weight += ch.weight;
        cur.max_char = ch.max_char;
        ++cur.child_count;
        if (cur.weight >= target) {
            out.push_back(cur);
            open = false;
        }
    }
    if (open) {
        if (!out.empty() && 2 * cur.weight < target) {
            out.back().weight += cur.weight;
            out.back().max_char = cur.max_char;
            out.back().child_count += cur.child_count;
        } else {
            out.push_back(cur);
        }
    }
    return out;
}


std::vector<std::uint64_t> entry_fields(const WbbEntry& e) {
    return {e.min_char, e.max_char, e.weight, e.chunk_off, e.entry_first, e.entry_count,
            e.child_page, e.is_leaf ? 1u : 0u};
}

WbbEntry entry_from_fields(const std::vector<std::uint64_t>& f) {
    require(f.size() == 8, ErrorCode::kCorruptStream, "bad root entry");
    WbbEntry e;
    e.min_char = static_cast<std::uint32_t>(f[0]);
    e.max_char = static_cast<std::uint32_t>(f[1]);
    e.weight = f[2];
    e.chunk_off = f[3];
    e.entry_first = f[4];
    e.entry_count = f[5];
    e.child_page = f[6];
    e.is_leaf = f[7] != 0;
    return e;
}

}  // namespace

const Bitstream& NavCache::view(std::uint64_t off, std::uint64_t len) {
    const std::uint64_t B = store_->block_bits();
    for (BlockAddr a = off / B; a <= (off + len - 1) / B; ++a) {
        if (seen(a)) continue;
        store_->charge_read(a);
        if (count_ < kInline) {
            recent_[count_] = a;
        } else {
            more_.insert(std::upper_bound(more_.begin(), more_.end(), a), a);
        }
        ++count_;
    }
    return store_->contents();
}

bool NavCache::seen(BlockAddr a) const {
    const auto inl = recent_.begin() + static_cast<std::ptrdiff_t>(std::min(count_, kInline));
    return std::find(recent_.begin(), inl, a) != inl || std::binary_search(more_.begin(), more_.end(), a);
}

WbbIndex WbbIndex::build(std::span<const std::uint32_t> x, std::uint32_t sigma, BlockStore& store) {
    require(!x.empty(), ErrorCode::kInvalidArgument, "string must be non-empty");
    require(sigma >= 1, ErrorCode::kInvalidArgument, "alphabet must be non-empty");
    WbbIndex idx(store);
    const std::uint64_t n = x.size();
    idx.n_ = n;
    idx.sigma_ = sigma;
    idx.char_counts_.assign(sigma, 0);
    for (auto c : x) {
        require(c < sigma, ErrorCode::kInvalidArgument, "character outside alphabet");
        ++idx.char_counts_[c];
    }

    // No character may own more than half the positions: the later half of
    // the most common one becomes a twin character sorted right after it.
    const auto top = static_cast<std::uint32_t>(
        std::max_element(idx.char_counts_.begin(), idx.char_counts_.end()) - idx.char_counts_.begin());
    if (n >= 2 && 2 * idx.char_counts_[top] > n) idx.split_char_ = top;
    const std::uint32_t isigma = idx.internal_sigma();

    std::vector<std::uint64_t> bucket(isigma + 1, 0);
    std::vector<std::uint32_t> ichar(n);
    {
        const std::uint64_t keep = (idx.char_counts_[top] + 1) / 2;
        std::uint64_t seen = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
            std::uint32_t c = x[i];
            if (idx.split_char_) {
                if (c > top) ++c;
                else if (c == top && seen++ >= keep) ++c;
            }
            ichar[i] = c;
            ++bucket[c + 1];
        }
    }
    for (std::uint32_t c = 0; c < isigma; ++c) bucket[c + 1] += bucket[c];
    std::vector<std::uint64_t> occ_pos(n);
    std::vector<std::uint32_t> occ_char(n);
    {
        auto fill = bucket;
        for (std::uint64_t i = 0; i < n; ++i) {
            const std::uint64_t k = fill[ichar[i]]++;
            occ_pos[k] = i;
            occ_char[k] = ichar[i];
        }
    }

    // Unpruned tree, bottom-up. Level 0 holds single occurrences.
    std::vector<std::vector<BuildNode>> lv(1);
    lv[0].resize(n);
    for (std::uint64_t k = 0; k < n; ++k) lv[0][k] = BuildNode{k, 1, occ_char[k], occ_char[k], 0, 0};
    std::uint64_t target = kBranching;
    while (lv.back().size() > 1 || lv.size() == 1) {
        lv.push_back(group_level(lv.back(), target));
        target *= kBranching;
    }
    idx.levels_ = static_cast<unsigned>(lv.size() - 1);

    // Pruned tree in preorder, which is also left-to-right order for any
    // set of disjoint nodes.
    std::vector<PrunedNode> nodes;
    std::vector<std::size_t> child_ids;
    {
        // Children are numbered after their parent, so a node's children
        // are listed contiguously once grouped by parent.
        std::vector<std::int64_t> parent_of_node;
        std::vector<std::pair<unsigned, std::uint64_t>> stack{{idx.levels_, 0}};
        std::vector<std::int64_t> parent_of{-1};
        while (!stack.empty()) {
            const auto [level, i] = stack.back();
            const std::int64_t parent = parent_of.back();
            stack.pop_back();
            parent_of.pop_back();
            const BuildNode& b = lv[level][i];
            PrunedNode p;
            p.level = level;
            p.index = i;
            p.depth = idx.levels_ - level;
            p.leaf = b.min_char == b.max_char;
            const std::size_t id = nodes.size();
            nodes.push_back(p);
            parent_of_node.push_back(parent);
            if (!p.leaf)
                for (std::uint32_t k = b.child_count; k-- > 0;) {
                    stack.emplace_back(level - 1, b.first_child + k);
                    parent_of.push_back(static_cast<std::int64_t>(id));
                }
        }
        std::vector<std::size_t> fill(nodes.size() + 1, 0);
        for (std::size_t id = 1; id < nodes.size(); ++id) ++fill[static_cast<std::size_t>(parent_of_node[id]) + 1];
        for (std::size_t id = 0; id < nodes.size(); ++id) fill[id + 1] += fill[id];
        for (std::size_t id = 0; id < nodes.size(); ++id) {
            nodes[id].child_begin = fill[id];
            nodes[id].child_end = fill[id + 1];
        }
        child_ids.resize(nodes.size() > 0 ? nodes.size() - 1 : 0);
        for (std::size_t id = 1; id < nodes.size(); ++id)
            child_ids[fill[static_cast<std::size_t>(parent_of_node[id])]++] = id;
    }
    auto children = [&](std::size_t id) {
        return std::span<const std::size_t>(child_ids.data() + nodes[id].child_begin,
                                            nodes[id].child_end - nodes[id].child_begin);
    };
    idx.node_count_ = nodes.size();
    for (const auto& p : nodes) idx.height_ = std::max(idx.height_, p.depth);

    std::vector<unsigned> mats;
    const unsigned deepest = std::max(idx.height_, 1u);
    for (unsigned d = 1; d < deepest; d *= 2) mats.push_back(d);
    mats.push_back(deepest);

    auto bnode = [&](const PrunedNode& p) -> const BuildNode& { return lv[p.level][p.index]; };

    // Stores.
    std::vector<std::vector<std::uint64_t>> entry_begin(mats.size()), entry_bit(mats.size());
    std::vector<std::uint64_t> scratch;
    for (std::size_t k = 0; k < mats.size(); ++k) {
        const unsigned D = mats[k];
        const long prev = k == 0 ? -1 : static_cast<long>(mats[k - 1]);
        Bitstream region;
        for (const auto& p : nodes) {
            const bool member = p.depth == D || (p.leaf && static_cast<long>(p.depth) > prev && p.depth < D);
            if (!member) continue;
            const BuildNode& b = bnode(p);
            scratch.assign(occ_pos.begin() + b.begin, occ_pos.begin() + b.begin + b.weight);
            std::sort(scratch.begin(), scratch.end());
            entry_begin[k].push_back(b.begin);
            entry_bit[k].push_back(region.size());
            append_gamma(region, scratch.size() + 1);
            std::uint64_t last = 0;
            for (std::size_t t = 0; t < scratch.size(); ++t) {
                append_gamma(region, t == 0 ? scratch[t] + 1 : scratch[t] - last);
                last = scratch[t];
            }
        }
        entry_bit[k].push_back(region.size());
        WbbStoreInfo info;
        info.depth = D;
        info.bits = region.size();
        info.entries = entry_begin[k].size();
        info.base = store.append_region(region);
        idx.stores_.push_back(info);
    }
    idx.index_store_depths();

    // Entries for every pruned node.
    std::vector<WbbEntry> entries(nodes.size());
    std::uint64_t max_entries = 0;
    for (const auto& s : idx.stores_) max_entries = std::max(max_entries, s.entries);
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        const PrunedNode& p = nodes[id];
        const BuildNode& b = bnode(p);
        const unsigned k = idx.store_for_depth(p.depth);
        const auto& eb = entry_begin[k];
        const auto first = static_cast<std::uint64_t>(std::lower_bound(eb.begin(), eb.end(), b.begin) - eb.begin());
        const auto last =
            static_cast<std::uint64_t>(std::lower_bound(eb.begin(), eb.end(), b.begin + b.weight) - eb.begin());
        WbbEntry& e = entries[id];
        e.min_char = b.min_char;
        e.max_char = b.max_char;
        e.weight = b.weight;
        e.chunk_off = entry_bit[k][first];
        e.entry_first = first;
        e.entry_count = last - first;
        e.is_leaf = p.leaf;
    }

    // Page layout. A page holds its length, the width of its relative offsets
    // and one slot per child.
    Widths w;
    w.ch = bit_width_for(isigma - 1);
    w.entry = bit_width_for(max_entries);
    std::uint64_t max_store_bits = 0;
    for (const auto& s : idx.stores_) max_store_bits = std::max(max_store_bits, s.bits);
    w.off = bit_width_for(max_store_bits);
    w.page = 64;
    idx.widths_ = w;
    const std::uint64_t B = store.block_bits();
    auto rel_width = [&](std::size_t id) {
        std::uint64_t widest = 0;
        for (std::size_t c : children(id)) widest = std::max(widest, entries[c].chunk_off - entries[id].chunk_off);
        return bit_width_for(widest);
    };
    auto page_bits = [&](std::size_t id) {
        const PageFormat f = idx.page_format(entries[id], nodes[id].depth, rel_width(id));
        std::uint64_t bits = kPageHeaderBits + kRelWidthBits;
        for (std::size_t c : children(id)) bits += nodes[c].leaf ? f.leaf_bits : f.node_bits;
        require(bits < (std::uint64_t{1} << kPageHeaderBits), ErrorCode::kPrecondition, "node page too large");
        return bits;
    };
    std::vector<std::uint64_t> size_of(nodes.size(), 0);
    auto layout = [&](std::vector<std::uint64_t>& page_off) {
        for (std::size_t id = 0; id < nodes.size(); ++id)
            if (!nodes[id].leaf) size_of[id] = page_bits(id);
        page_off.assign(nodes.size(), 0);
        std::uint64_t cursor = 0;
        auto place = [&](std::size_t id) {
            const std::uint64_t size = size_of[id];
            const std::uint64_t rem = B - cursor % B;
            // Start a fresh block only when that leaves the current one at
            // least half full.
            if (size > rem && cursor % B != 0 && 2 * rem <= B) cursor += rem;
            page_off[id] = cursor;
            cursor += size;
        };
        auto fits = [&](std::size_t id) { return cursor % B != 0 && size_of[id] <= B - cursor % B; };
        // FIFO queues as vectors with a read index.
        std::vector<std::size_t> pending, local;
        if (!nodes[0].leaf) pending.push_back(0);
        for (std::size_t next = 0; next < pending.size(); ++next) {
            const std::size_t start = pending[next];
            place(start);
            // Pack the top of this subtree into the same block while it fits.
            local.assign(1, start);
            for (std::size_t head = 0; head < local.size(); ++head) {
                const std::size_t u = local[head];
                for (std::size_t c : children(u)) {
                    if (nodes[c].leaf) continue;
                    if (fits(c)) {
                        place(c);
                        local.push_back(c);
                    } else {
                        pending.push_back(c);
                    }
                }
            }
        }
        return cursor;
    };
    std::vector<std::uint64_t> page_off;
    const std::uint64_t tree_estimate = layout(page_off);
    idx.widths_.page = bit_width_for(tree_estimate);
    idx.tree_off_ = store.size_bits();
    idx.tree_bits_ = layout(page_off);
    for (std::size_t id = 0; id < nodes.size(); ++id)
        if (!nodes[id].leaf) entries[id].child_page = page_off[id];

    Bitstream tree = Bitstream::zeros(idx.tree_bits_);
    Bitstream page;
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        if (nodes[id].leaf) continue;
        page.clear();
        page.push_bits(size_of[id], kPageHeaderBits);
        const unsigned rel = rel_width(id);
        page.push_bits(rel, kRelWidthBits);
        const PageFormat f = idx.page_format(entries[id], nodes[id].depth, rel);
        for (std::size_t c : children(id)) idx.write_entry(page, entries[c], entries[id], f);
        copy_bits(page, 0, tree, page_off[id], page.size());
    }
    if (idx.tree_bits_ > 0) {
        const std::uint64_t at = store.append_region(tree);
        require(at == idx.tree_off_, ErrorCode::kPrecondition, "tree region placed unexpectedly");
    }
    idx.root_ = entries[0];
    return idx;
}

void WbbIndex::index_store_depths() {
    store_of_depth_.clear();
    for (unsigned k = 0; k < stores_.size(); ++k)
        while (store_of_depth_.size() <= stores_[k].depth) store_of_depth_.push_back(k);
}

unsigned WbbIndex::store_for_depth(unsigned depth) const {
    if (depth < store_of_depth_.size()) return store_of_depth_[depth];
    for (unsigned k = 0; k < stores_.size(); ++k)
        if (stores_[k].depth >= depth) return k;
    fail(ErrorCode::kPrecondition, "depth below the deepest store");
}

std::vector<unsigned> WbbIndex::materialized_depths() const {
    std::vector<unsigned> out;
    for (const auto& s : stores_) out.push_back(s.depth);
    return out;
}

WbbIndex WbbIndex::open(BlockStore& store, const Manifest& m) {
    require(m.get("kind") == "wbb", ErrorCode::kCorruptStream, "manifest is not a wbb index");
    WbbIndex idx(store);
    idx.n_ = m.get_u64("n");
    idx.sigma_ = static_cast<std::uint32_t>(m.get_u64("sigma"));
    if (m.has("split_char")) idx.split_char_ = static_cast<std::uint32_t>(m.get_u64("split_char"));
    require(m.get_u64("c") == kBranching, ErrorCode::kCorruptStream, "unsupported branching parameter");
    idx.levels_ = static_cast<unsigned>(m.get_u64("levels"));
    idx.height_ = static_cast<unsigned>(m.get_u64("height"));
    const auto depths = m.get_list("store_depths");
    const auto bases = m.get_list("store_offsets");
    const auto bits = m.get_list("store_bits");
    const auto counts = m.get_list("store_entries");
    require(!depths.empty() && bases.size() == depths.size() && bits.size() == depths.size() &&
                counts.size() == depths.size(),
            ErrorCode::kCorruptStream, "store lists disagree");
    for (std::size_t k = 0; k < depths.size(); ++k)
        idx.stores_.push_back({static_cast<unsigned>(depths[k]), bases[k], bits[k], counts[k]});
    for (std::size_t k = 1; k < depths.size(); ++k)
        require(depths[k - 1] < depths[k], ErrorCode::kCorruptStream, "store depths not increasing");
    idx.index_store_depths();
    idx.tree_off_ = m.get_u64("tree_offset");
    idx.tree_bits_ = m.get_u64("tree_bits");
    idx.node_count_ = m.get_u64("node_count");
    const auto w = m.get_list("widths");
    require(w.size() == 4, ErrorCode::kCorruptStream, "bad widths");
    idx.widths_ = {static_cast<unsigned>(w[0]), static_cast<unsigned>(w[1]), static_cast<unsigned>(w[2]),
                   static_cast<unsigned>(w[3])};
    idx.root_ = entry_from_fields(m.get_list("root"));
    idx.char_counts_ = m.get_list("char_counts");
    require(idx.char_counts_.size() == idx.sigma_, ErrorCode::kCorruptStream, "char count length mismatch");
    require(idx.tree_off_ + idx.tree_bits_ <= store.size_bits(), ErrorCode::kCorruptStream, "tree outside store");
    return idx;
}

void WbbIndex::describe(Manifest& m) const {
    m.set("kind", "wbb");
    m.set_u64("n", n_);
    m.set_u64("sigma", sigma_);
    if (split_char_) m.set_u64("split_char", *split_char_);
    m.set_u64("c", kBranching);
    m.set_u64("levels", levels_);
    m.set_u64("height", height_);
    std::vector<std::uint64_t> depths, bases, bits, counts;
    for (const auto& s : stores_) {
        depths.push_back(s.depth);
        bases.push_back(s.base);
        bits.push_back(s.bits);
        counts.push_back(s.entries);
    }
    m.set_list("store_depths", depths);
    m.set_list("store_offsets", bases);
    m.set_list("store_bits", bits);
    m.set_list("store_entries", counts);
    m.set_u64("tree_offset", tree_off_);
    m.set_u64("tree_bits", tree_bits_);
    m.set_u64("node_count", node_count_);
    m.set_list("widths", {widths_.ch, widths_.off, widths_.entry, widths_.page});
    m.set_list("root", entry_fields(root_));
    m.set_list("char_counts", char_counts_);
}

std::pair<std::uint32_t, std::uint32_t> WbbIndex::to_internal(std::uint32_t lo, std::uint32_t hi) const {
    require(lo <= hi && hi < sigma_, ErrorCode::kInvalidArgument, "invalid character range");
    if (!split_char_) return {lo, hi};
    const std::uint32_t m = *split_char_;
    return {lo + (lo > m ? 1 : 0), hi + (hi >= m ? 1 : 0)};
}

WbbIndex::PageFormat WbbIndex::page_format(const WbbEntry& parent, unsigned depth, unsigned rel_off) const {
    PageFormat f;
    f.weight = bit_width_for(parent.weight);
    f.relative = store_for_depth(depth + 1) == store_for_depth(depth);
    if (f.relative) {
        // Children share the parent's store, so their runs lie inside it.
        f.off = rel_off;
        f.first = bit_width_for(parent.entry_count - 1);
        f.count = bit_width_for(parent.entry_count);
    } else {
        f.off = widths_.off;
        f.first = widths_.entry;
        f.count = widths_.entry;
    }
    f.leaf_bits = 1 + widths_.ch + f.weight + f.off + f.first;
    f.node_bits = f.leaf_bits + widths_.ch + f.count + widths_.page;
    return f;
}

// Leaf slots omit the fields a leaf cannot need: its two characters agree,
// it is a single store entry and it has no page.
void WbbIndex::write_entry(Bitstream& out, const WbbEntry& e, const WbbEntry& parent, const PageFormat& f) const {
    out.push_bit(e.is_leaf);
    out.push_bits(e.min_char, widths_.ch);
    if (!e.is_leaf) out.push_bits(e.max_char, widths_.ch);
    out.push_bits(e.weight, f.weight);
    out.push_bits(f.relative ? e.chunk_off - parent.chunk_off : e.chunk_off, f.off);
    out.push_bits(f.relative ? e.entry_first - parent.entry_first : e.entry_first, f.first);
    if (!e.is_leaf) {
        out.push_bits(e.entry_count, f.count);
        out.push_bits(e.child_page, widths_.page);
    }
}

WbbEntry WbbIndex::read_slot(const Bitstream& bits, std::uint64_t& pos, std::uint64_t end, const PageFormat& f,
                             const WbbEntry& parent) const {
    auto take = [&](unsigned width) -> std::uint64_t {
        if (width == 0) return 0;
        if (pos + width > end) fail(ErrorCode::kCorruptStream, "slot crosses page end");
        const std::uint64_t v = bits.get_bits(pos, width);
        pos += width;
        return v;
    };
    WbbEntry e;
    e.is_leaf = take(1) != 0;
    e.min_char = static_cast<std::uint32_t>(take(widths_.ch));
    e.max_char = e.is_leaf ? e.min_char : static_cast<std::uint32_t>(take(widths_.ch));
    e.weight = take(f.weight);
    e.chunk_off = take(f.off) + (f.relative ? parent.chunk_off : 0);
    e.entry_first = take(f.first) + (f.relative ? parent.entry_first : 0);
    e.entry_count = e.is_leaf ? 1 : take(f.count);
    if (!e.is_leaf) e.child_page = take(widths_.page);
    return e;
}

std::uint64_t WbbIndex::check_page(const Bitstream& bits, std::uint64_t start, std::uint64_t len) const {
    require(len >= kPageHeaderBits + kRelWidthBits && start + len <= bits.size(), ErrorCode::kCorruptStream,
            "node page out of bounds");
    return start + len;
}

void WbbIndex::parse_page(const Bitstream& bits, std::uint64_t start, std::uint64_t len, const WbbEntry& parent,
                          unsigned depth, std::vector<WbbEntry>& out) const {
    const auto rel_off = static_cast<unsigned>(bits.read_bits(start + kPageHeaderBits, kRelWidthBits));
    const PageFormat f = page_format(parent, depth, rel_off);
    out.clear();
    const std::uint64_t end = check_page(bits, start, len);
    std::uint64_t pos = start + kPageHeaderBits + kRelWidthBits;
    while (pos < end) {
        out.push_back(read_slot(bits, pos, end, f, parent));
    }
}

void WbbIndex::visit(const WbbEntry& e, unsigned depth, std::uint32_t l, std::uint32_t r, NavCache& cache,
                     std::vector<WbbSelected>& out) const {
    if (e.max_char < l || e.min_char > r) return;
    if (l <= e.min_char && e.max_char <= r) {
        out.push_back({e, depth, store_for_depth(depth)});
        return;
    }
    require(!e.is_leaf, ErrorCode::kCorruptStream, "leaf spans several characters");
    const std::uint64_t at = tree_off_ + e.child_page;
    const auto len = cache.view(at, kPageHeaderBits).read_bits(at, kPageHeaderBits);
    const Bitstream& bits = cache.view(at, len);
    const auto rel_off = static_cast<unsigned>(bits.read_bits(at + kPageHeaderBits, kRelWidthBits));
    const PageFormat f = page_format(e, depth, rel_off);
    const std::uint64_t end = check_page(bits, at, len);
    std::uint64_t pos = at + kPageHeaderBits + kRelWidthBits;
    const unsigned ch = widths_.ch;
    while (pos < end) {
        // Look at the character span first and skip slots left of the range.
        // A leaf slot has one character field, a node slot two.
        require(pos + 1 + ch <= end, ErrorCode::kCorruptStream, "slot crosses page end");
        const bool leaf = bits.get_bits(pos, 1) != 0;
        require(leaf || pos + 1 + 2 * ch <= end, ErrorCode::kCorruptStream, "slot crosses page end");
        const auto lo = static_cast<std::uint32_t>(bits.get_bits(pos + 1, ch));
        if (lo > r) break;
        const auto hi = leaf ? lo : static_cast<std::uint32_t>(bits.get_bits(pos + 1 + ch, ch));
        if (hi < l) {
            pos += leaf ? f.leaf_bits : f.node_bits;
            continue;
        }
        visit(read_slot(bits, pos, end, f, e), depth + 1, l, r, cache, out);
    }
}

std::vector<WbbSelected> WbbIndex::decompose_internal(std::uint32_t l, std::uint32_t r, NavCache& cache) const {
    require(l <= r && r < internal_sigma(), ErrorCode::kInvalidArgument, "invalid character range");
    std::vector<WbbSelected> out;
    visit(root_, 0, l, r, cache, out);
    return out;
}

std::vector<WbbSelected> WbbIndex::decompose_range(std::uint32_t lo, std::uint32_t hi) {
    const auto [l, r] = to_internal(lo, hi);
    NavCache cache(*store_);
    return decompose_internal(l, r, cache);
}

void WbbIndex::plan_chunks_into(std::span<const WbbSelected> selected, std::vector<WbbChunk>& out) const {
    out.clear();
    for (const auto& s : selected)
        out.push_back({s.store, stores_[s.store].base + s.entry.chunk_off, s.entry.entry_first, s.entry.entry_count});
    std::sort(out.begin(), out.end(), [](const WbbChunk& a, const WbbChunk& b) {
        return a.store != b.store ? a.store < b.store : a.entry_first < b.entry_first;
    });
    std::size_t kept = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (kept > 0 && out[kept - 1].store == out[i].store &&
            out[kept - 1].entry_first + out[kept - 1].entry_count == out[i].entry_first) {
            out[kept - 1].entry_count += out[i].entry_count;
        } else {
            out[kept++] = out[i];
        }
    }
    out.resize(kept);
}

std::vector<WbbChunk> WbbIndex::plan_chunks(std::span<const WbbSelected> selected) const {
    std::vector<WbbChunk> out;
    plan_chunks_into(selected, out);
    return out;
}

std::uint64_t WbbIndex::count_range(std::uint32_t lo, std::uint32_t hi) {
    std::uint64_t z = 0;
    for (const auto& s : decompose_range(lo, hi)) z += s.entry.weight;
    return z;
}

void WbbIndex::decode_entries(BlockScanner& r, std::uint64_t count, std::vector<std::uint64_t>& out) {
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::uint64_t card = r.read_gamma() - 1;
        std::uint64_t pos = 0;
        for (std::uint64_t t = 0; t < card; ++t) {
            pos = t == 0 ? r.read_gamma() - 1 : pos + r.read_gamma();
            out.push_back(pos);
        }
    }
}

void WbbIndex::read_selected(std::span<const WbbSelected> selected, WbbQueryTrace* trace) {
    plan_chunks_into(selected, scratch_.chunks);
    const auto& chunks = scratch_.chunks;
    store_->note_working_set(std::max<std::uint64_t>(chunks.size(), 1) * store_->block_bits());
    auto& positions = scratch_.positions;
    positions.clear();
    const std::uint64_t before = store_->snapshot().reads;
    for (const auto& c : chunks) {
        BlockScanner scan(*store_, c.off);
        decode_entries(scan, c.entry_count, positions);
        if (trace) {
            trace->data_bits_read += scan.position() - c.off;
            trace->chunks.push_back(c);
        }
    }
    if (trace) trace->data_reads += store_->snapshot().reads - before;
    std::sort(positions.begin(), positions.end());
}

CompressedBitmap WbbIndex::range_query(std::uint32_t lo, std::uint32_t hi, WbbQueryTrace* trace) {
    const auto [l, r] = to_internal(lo, hi);
    NavCache cache(*store_);
    auto& selected = scratch_.selected;
    selected.clear();
    visit(root_, 0, l, r, cache, selected);
    std::uint64_t z = 0;
    for (const auto& s : selected) z += s.entry.weight;
    const bool use_complement =
        mode_ == ComplementMode::kAlways || (mode_ == ComplementMode::kAuto && 2 * z > n_);
    if (trace) trace->used_complement = use_complement;
    if (use_complement) {
        selected.clear();
        if (l > 0) visit(root_, 0, 0, l - 1, cache, selected);
        if (r + 1 < internal_sigma()) visit(root_, 0, r + 1, internal_sigma() - 1, cache, selected);
    }
    if (trace) {
        trace->selected_nodes = selected.size();
        trace->nav_reads += cache.reads();
    }
    scratch_.positions.clear();
    if (!selected.empty()) read_selected(selected, trace);
    BitmapBuilder out(n_);
    if (use_complement) {
        std::uint64_t next = 0;
        for (std::uint64_t p : scratch_.positions) {
            for (; next < p; ++next) out.push(next);
            next = p + 1;
        }
        for (; next < n_; ++next) out.push(next);
    } else {
        for (std::uint64_t p : scratch_.positions) out.push(p);
    }
    return std::move(out).finish();
}

std::vector<WbbNodeView> WbbIndex::walk() const {
    std::vector<WbbNodeView> out;
    out.push_back({root_, 0, -1, {}});
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].entry.is_leaf) continue;
        const WbbEntry e = out[i].entry;
        const std::uint64_t at = tree_off_ + e.child_page;
        const auto len = store_->peek(at, kPageHeaderBits).read_bits(0, kPageHeaderBits);
        std::vector<WbbEntry> children;
        parse_page(store_->peek(at, len), 0, len, e, out[i].depth, children);
        for (const auto& c : children) {
            out[i].children.push_back(out.size());
            out.push_back({c, out[i].depth + 1, static_cast<std::int64_t>(i), {}});
        }
    }
    return out;
}

std::vector<std::vector<std::uint64_t>> WbbIndex::peek_store_entries(unsigned store) const {
    require(store < stores_.size(), ErrorCode::kInvalidArgument, "no such store");
    const auto& s = stores_[store];
    const Bitstream bits = store_->peek(s.base, s.bits);
    std::vector<std::vector<std::uint64_t>> out(s.entries);
    BitReader r(bits);
    for (auto& entry : out) {
        const std::uint64_t card = r.read_gamma() - 1;
        std::uint64_t pos = 0;
        for (std::uint64_t t = 0; t < card; ++t) {
            pos = t == 0 ? r.read_gamma() - 1 : pos + r.read_gamma();
            entry.push_back(pos);
        }
    }
    return out;
}

WbbSpaceReport WbbIndex::space_report() const {
    WbbSpaceReport rep;
    for (const auto& s : stores_) {
        rep.store_bits.push_back(s.bits);
        rep.total_bits += s.bits;
    }
    rep.tree_bits = tree_bits_;
    rep.total_bits += tree_bits_;
    rep.node_count = node_count_;
    for (auto z : char_counts_)
        if (z > 0) {
            const double p = static_cast<double>(z) / static_cast<double>(n_);
            rep.h0 -= p * std::log2(p);
        }
    return rep;
}

}  // namespace rix
