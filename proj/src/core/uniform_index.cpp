#include "rangeindex/uniform_index.hpp"

#include <algorithm>
#include <array>

#include "rangeindex/errors.hpp"

namespace rix {

namespace {

std::vector<std::uint64_t> merge_sorted(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
    std::vector<std::uint64_t> out(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
    return out;
}

}  // namespace

UniformIndex UniformIndex::build(std::span<const std::uint32_t> x, std::uint32_t sigma, BlockStore& store) {
    require(!x.empty(), ErrorCode::kInvalidArgument, "string must be non-empty");
    require(sigma >= 1, ErrorCode::kInvalidArgument, "alphabet must be non-empty");
    UniformIndex idx(store);
    idx.n_ = x.size();
    idx.sigma_ = sigma;
    while (idx.padded_sigma_ < sigma) {
        idx.padded_sigma_ *= 2;
        ++idx.height_;
    }

    std::vector<std::vector<std::uint64_t>> level(idx.padded_sigma_);
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(x[i] < sigma, ErrorCode::kInvalidArgument, "character outside alphabet");
        level[x[i]].push_back(i);
    }
    idx.prefix_.assign(sigma + 1, 0);
    for (std::uint32_t a = 0; a < sigma; ++a) idx.prefix_[a + 1] = idx.prefix_[a] + level[a].size();

    // Encode bottom-up; levels_[0] is the root.
    idx.levels_.assign(idx.height_ + 1, {});
    for (unsigned depth = idx.height_ + 1; depth-- > 0;) {
        Bitstream region;
        auto& dir = idx.levels_[depth];
        dir.resize(level.size());
        for (std::size_t i = 0; i < level.size(); ++i) {
            const CompressedBitmap bm = compress_positions(level[i], idx.n_);
            dir[i].offset = region.size();
            dir[i].length = bm.payload().size();
            dir[i].card = bm.cardinality();
            region.append(bm.payload());
        }
        const std::uint64_t base = store.append_region(region);
        for (auto& e : dir) e.offset += base;
        if (depth == 0) break;
        std::vector<std::vector<std::uint64_t>> parent(level.size() / 2);
        for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = merge_sorted(level[2 * i], level[2 * i + 1]);
        level = std::move(parent);
    }

    Bitstream dir_bits;
    for (const auto& lvl : idx.levels_)
        for (const auto& e : lvl) {
            dir_bits.push_bits(e.offset, 64);
            dir_bits.push_bits(e.length, 64);
            dir_bits.push_bits(e.card, 64);
        }
    idx.dir_offset_ = store.append_region(dir_bits);
    return idx;
}

UniformIndex UniformIndex::open(BlockStore& store, const Manifest& m) {
    require(m.get("kind") == "uniform", ErrorCode::kCorruptStream, "manifest is not a uniform index");
    UniformIndex idx(store);
    idx.n_ = m.get_u64("n");
    idx.sigma_ = static_cast<std::uint32_t>(m.get_u64("sigma"));
    idx.padded_sigma_ = static_cast<std::uint32_t>(m.get_u64("padded_sigma"));
    idx.height_ = static_cast<unsigned>(m.get_u64("height"));
    idx.dir_offset_ = m.get_u64("directory_offset");
    idx.prefix_ = m.get_list("prefix_counts");
    require(idx.prefix_.size() == idx.sigma_ + std::size_t{1}, ErrorCode::kCorruptStream, "prefix count length mismatch");
    std::uint64_t nodes = 2 * std::uint64_t{idx.padded_sigma_} - 1;
    // The directory is memory resident; loading it is not part of any query.
    const Bitstream raw = store.peek(idx.dir_offset_, nodes * 192);
    std::uint64_t at = 0;
    idx.levels_.assign(idx.height_ + 1, {});
    for (unsigned d = 0; d <= idx.height_; ++d) {
        idx.levels_[d].resize(std::uint64_t{1} << d);
        for (auto& e : idx.levels_[d]) {
            e.offset = raw.read_bits(at, 64);
            e.length = raw.read_bits(at + 64, 64);
            e.card = raw.read_bits(at + 128, 64);
            at += 192;
        }
    }
    return idx;
}

void UniformIndex::describe(Manifest& m) const {
    m.set("kind", "uniform");
    m.set_u64("n", n_);
    m.set_u64("sigma", sigma_);
    m.set_u64("padded_sigma", padded_sigma_);
    m.set_u64("height", height_);
    m.set_u64("directory_offset", dir_offset_);
    std::vector<std::uint64_t> level_offsets;
    for (const auto& lvl : levels_) level_offsets.push_back(lvl.front().offset);
    m.set_list("level_offsets", level_offsets);
    m.set_list("prefix_counts", prefix_);
}

void UniformIndex::check_range(std::uint32_t lo, std::uint32_t hi) const {
    require(lo <= hi && hi < sigma_, ErrorCode::kInvalidArgument, "invalid character range");
}

std::uint64_t UniformIndex::count_range(std::uint32_t lo, std::uint32_t hi) const {
    check_range(lo, hi);
    return prefix_[hi + 1] - prefix_[lo];
}

std::vector<TreeNodeRef> UniformIndex::cover(std::uint32_t lo, std::uint32_t hi) const {
    std::vector<TreeNodeRef> out;
    cover_into(lo, hi, out);
    return out;
}

void UniformIndex::cover_into(std::uint32_t lo, std::uint32_t hi, std::vector<TreeNodeRef>& out) const {
    require(lo <= hi && hi < padded_sigma_, ErrorCode::kInvalidArgument, "invalid character range");
    // Bottom-up canonical decomposition, as in a segment tree. Left-side
    // nodes come out in order; right-side ones are reversed at the end.
    out.clear();
    std::size_t right = 0;
    std::array<TreeNodeRef, 64> tail;
    std::uint64_t l = lo, r = std::uint64_t{hi} + 1;  // half-open at the current level
    for (unsigned depth = height_ + 1; depth-- > 0 && l < r;) {
        if (l & 1) out.push_back({depth, l++});
        if (r & 1) tail[right++] = {depth, --r};
        l >>= 1;
        r >>= 1;
    }
    while (right > 0) out.push_back(tail[--right]);
}

const UniformIndex::DirEntry& UniformIndex::entry(TreeNodeRef node) const {
    require(node.level <= height_ && node.index < levels_[node.level].size(), ErrorCode::kInvalidArgument,
            "node outside tree");
    return levels_[node.level][node.index];
}

void UniformIndex::open_cover(std::uint32_t lo, std::uint32_t hi, UniformQueryTrace* trace) {
    cover_into(lo, hi, nodes_);
    store_->note_working_set(nodes_.size() * store_->block_bits());
    for (const auto& node : nodes_) {
        const DirEntry& e = entry(node);
        if (e.card == 0) continue;
        store_->charge_stream_read(e.offset, e.length);
        cursors_.emplace_back(store_->contents(), e.offset, e.card);
        if (trace) {
            trace->nodes_read.push_back(node);
            trace->data_bits_read += e.length;
        }
    }
}

CompressedBitmap UniformIndex::range_query(std::uint32_t lo, std::uint32_t hi, UniformQueryTrace* trace) {
    const std::uint64_t z = count_range(lo, hi);
    const bool use_complement =
        mode_ == ComplementMode::kAlways || (mode_ == ComplementMode::kAuto && 2 * z > n_);
    if (trace) trace->used_complement = use_complement;
    cursors_.clear();
    if (!use_complement) {
        open_cover(lo, hi, trace);
    } else {
        // The two complementary ranges each hold fewer than n/2 positions.
        if (lo > 0) open_cover(0, lo - 1, trace);
        if (hi + 1 < padded_sigma_) open_cover(hi + 1, padded_sigma_ - 1, trace);
    }
    return merge_cursors(cursors_, n_, use_complement);
}

CompressedBitmap UniformIndex::peek_node(TreeNodeRef node) const {
    const DirEntry& e = entry(node);
    return CompressedBitmap(n_, e.card, store_->peek(e.offset, e.length));
}

std::uint64_t UniformIndex::node_cardinality(TreeNodeRef node) const { return entry(node).card; }

std::uint64_t UniformIndex::data_bits() const noexcept {
    std::uint64_t total = 0;
    for (const auto& lvl : levels_)
        for (const auto& e : lvl) total += e.length;
    return total;
}

std::uint64_t UniformIndex::directory_bits() const noexcept {
    return (2 * std::uint64_t{padded_sigma_} - 1) * 192 + (sigma_ + std::uint64_t{1}) * 64;
}

}  // namespace rix
