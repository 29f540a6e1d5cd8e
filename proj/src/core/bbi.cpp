#include <algorithm>
#include <map>

#include "rangeindex/dynamic.hpp"
#include "rangeindex/errors.hpp"

namespace rix {

namespace {

constexpr BbiKey kMinKey{0, 0};
constexpr BbiKey kMaxKey{~std::uint64_t{0}, ~std::uint64_t{0}};

std::uint64_t gamma_bits(std::uint64_t v) { return 2 * floor_log2(v) + 1; }

// Adds or removes one position in a list of pieces sorted by id.
void apply_record(std::vector<BbiSegment>& pieces, const BbiRecord& r) {
    auto it = std::lower_bound(pieces.begin(), pieces.end(), r.id,
                               [](const BbiSegment& s, std::uint64_t id) { return s.id < id; });
    if (r.insert) {
        if (it == pieces.end() || it->id != r.id) it = pieces.insert(it, BbiSegment{r.id, {}});
        auto& p = it->positions;
        auto at = std::lower_bound(p.begin(), p.end(), r.pos);
        if (at == p.end() || *at != r.pos) p.insert(at, r.pos);
    } else {
        if (it == pieces.end() || it->id != r.id) return;
        auto& p = it->positions;
        auto at = std::lower_bound(p.begin(), p.end(), r.pos);
        if (at != p.end() && *at == r.pos) p.erase(at);
        if (p.empty()) pieces.erase(it);
    }
}

// Appends a piece, joining it to the previous one when the ids agree.
void append_piece(std::vector<BbiSegment>& out, const BbiSegment& s) {
    if (s.positions.empty()) return;
    if (!out.empty() && out.back().id == s.id) {
        out.back().positions.insert(out.back().positions.end(), s.positions.begin(), s.positions.end());
    } else {
        out.push_back(s);
    }
}

bool in_ids(std::uint64_t id, std::uint64_t a, std::uint64_t b) { return id >= a && id < b; }

}  // namespace

BlockAddr BlockPool::allocate() {
    if (!free_.empty()) {
        const BlockAddr a = free_.back();
        free_.pop_back();
        return a;
    }
    return store_->allocate(1);
}

BufferedBitmapIndex::BufferedBitmapIndex(BlockPool& pool, unsigned id_bits, unsigned pos_bits, bool direct)
    : pool_(&pool), id_bits_(id_bits), pos_bits_(pos_bits) {
    require(id_bits >= 1 && id_bits <= 64 && pos_bits >= 1 && pos_bits <= 63, ErrorCode::kInvalidArgument,
            "bad record field widths");
    const std::uint64_t B = pool.store().block_bits();
    require(B >= 4 * (id_bits_ + 2 * pos_bits_ + 16), ErrorCode::kInvalidArgument,
            "block too small for a buffered bitmap index");
    capacity_ = direct ? 0 : B / record_bits();
    bulk_load({});
}

int BufferedBitmapIndex::new_node(bool leaf) {
    int id;
    if (!free_ids_.empty()) {
        id = free_ids_.back();
        free_ids_.pop_back();
        nodes_[static_cast<std::size_t>(id)] = Node{};
    } else {
        id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
    }
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.leaf = leaf;
    n.addr = pool_->allocate();
    if (leaf) leaf_of_addr_[n.addr] = id;
    return id;
}

void BufferedBitmapIndex::free_node(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.leaf) leaf_of_addr_.erase(n.addr);
    pool_->release(n.addr);
    n.alive = false;
    n.kids.clear();
    n.keys.clear();
    free_ids_.push_back(id);
}

void BufferedBitmapIndex::release_all() {
    for (const auto& n : nodes_)
        if (n.alive) pool_->release(n.addr);
    nodes_.clear();
    free_ids_.clear();
    leaf_of_addr_.clear();
    root_buffer_.clear();
    dirty_.clear();
    root_ = -1;
}

std::uint64_t BufferedBitmapIndex::leaf_bits(const std::vector<BbiSegment>& pieces) const {
    std::uint64_t bits = gamma_bits(pieces.size() + 1);
    for (const auto& p : pieces) {
        bits += id_bits_ + gamma_bits(p.positions.size()) + gamma_bits(p.positions.front() + 1);
        for (std::size_t i = 1; i < p.positions.size(); ++i) bits += gamma_bits(p.positions[i] - p.positions[i - 1]);
    }
    return bits;
}

Bitstream BufferedBitmapIndex::encode_leaf(const std::vector<BbiSegment>& pieces) const {
    Bitstream out;
    append_gamma(out, pieces.size() + 1);
    for (const auto& p : pieces) {
        out.push_bits(p.id, id_bits_);
        append_gamma(out, p.positions.size());
        append_gamma(out, p.positions.front() + 1);
        for (std::size_t i = 1; i < p.positions.size(); ++i) append_gamma(out, p.positions[i] - p.positions[i - 1]);
    }
    return out;
}

std::vector<BbiSegment> BufferedBitmapIndex::decode_leaf(const Bitstream& bits, std::uint64_t off) const {
    BitReader r(bits, off);
    const std::uint64_t n = r.read_gamma() - 1;
    std::vector<BbiSegment> out(n);
    for (auto& p : out) {
        p.id = r.read_bits(id_bits_);
        const std::uint64_t c = r.read_gamma();
        p.positions.resize(c);
        p.positions[0] = r.read_gamma() - 1;
        for (std::uint64_t i = 1; i < c; ++i) p.positions[i] = p.positions[i - 1] + r.read_gamma();
    }
    return out;
}

// Greedy cut into blocks of at most `limit` bits, splitting pieces at
// position granularity.
std::vector<std::vector<BbiSegment>> BufferedBitmapIndex::pack(const std::vector<BbiSegment>& pieces,
                                                               std::uint64_t limit) const {
    std::vector<std::vector<BbiSegment>> chunks(1);
    std::uint64_t cur = gamma_bits(1);
    for (const auto& p : pieces) {
        bool open = false;
        std::uint64_t prev = 0;
        for (std::uint64_t pos : p.positions) {
            auto start_cost = [&](std::size_t np) {
                return gamma_bits(np + 2) - gamma_bits(np + 1) + id_bits_ + gamma_bits(1) + gamma_bits(pos + 1);
            };
            std::uint64_t add;
            if (open) {
                const std::uint64_t c = chunks.back().back().positions.size();
                add = gamma_bits(c + 1) - gamma_bits(c) + gamma_bits(pos - prev);
            } else {
                add = start_cost(chunks.back().size());
            }
            if (cur + add > limit && !chunks.back().empty()) {
                chunks.emplace_back();
                cur = gamma_bits(1);
                open = false;
                add = start_cost(0);
            }
            if (!open) {
                chunks.back().push_back(BbiSegment{p.id, {}});
                open = true;
            }
            chunks.back().back().positions.push_back(pos);
            cur += add;
            prev = pos;
        }
    }
    return chunks;
}

std::vector<BbiSegment> BufferedBitmapIndex::read_leaf(int leaf) {
    const Node& n = nodes_[static_cast<std::size_t>(leaf)];
    pool_->store().charge_read(n.addr);
    return decode_leaf(pool_->store().contents(), n.addr * pool_->store().block_bits());
}

std::vector<BbiSegment> BufferedBitmapIndex::peek_leaf(int leaf) const {
    const Node& n = nodes_[static_cast<std::size_t>(leaf)];
    return decode_leaf(pool_->store().contents(), n.addr * pool_->store().block_bits());
}

void BufferedBitmapIndex::notify(BlockAddr addr) {
    if (observer_) observer_(addr);
}

void BufferedBitmapIndex::bulk_load(std::span<const BbiSegment> segments) {
    release_all();
    std::vector<BbiSegment> pieces;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        require(i == 0 || segments[i - 1].id < segments[i].id, ErrorCode::kInvalidArgument,
                "segments must be sorted by distinct id");
        if (!segments[i].positions.empty()) pieces.push_back(segments[i]);
    }
    const std::uint64_t B = pool_->store().block_bits();
    const auto chunks = pack(pieces, B);
    std::vector<int> level;
    std::vector<BbiKey> low;
    for (const auto& c : chunks) {
        const int leaf = new_node(true);
        Bitstream b = encode_leaf(c);
        nodes_[static_cast<std::size_t>(leaf)].count = b.size();
        b.pad_to(B);
        pool_->store().write_block(nodes_[static_cast<std::size_t>(leaf)].addr, b);
        level.push_back(leaf);
        low.push_back(c.empty() ? kMinKey : BbiKey{c.front().id, c.front().positions.front()});
    }
    while (level.size() > 1) {
        std::vector<int> up;
        std::vector<BbiKey> up_low;
        for (std::size_t i = 0; i < level.size(); i += kFanout) {
            const std::size_t end = std::min(level.size(), i + kFanout);
            const int v = new_node(false);
            for (std::size_t j = i; j < end; ++j) {
                nodes_[static_cast<std::size_t>(v)].kids.push_back(level[j]);
                nodes_[static_cast<std::size_t>(v)].keys.push_back(j == i ? kMinKey : low[j]);
                nodes_[static_cast<std::size_t>(level[j])].parent = v;
            }
            up.push_back(v);
            up_low.push_back(low[i]);
        }
        level = std::move(up);
        low = std::move(up_low);
    }
    root_ = level.front();
}

void BufferedBitmapIndex::insert_kid(int parent, int after, int kid, BbiKey key) {
    Node& p = nodes_[static_cast<std::size_t>(parent)];
    const auto at = std::find(p.kids.begin(), p.kids.end(), after) - p.kids.begin() + 1;
    p.kids.insert(p.kids.begin() + at, kid);
    p.keys.insert(p.keys.begin() + at, key);
    nodes_[static_cast<std::size_t>(kid)].parent = parent;
    if (p.kids.size() > 2 * kFanout) dirty_.push_back(parent);
}

void BufferedBitmapIndex::write_leaf(int leaf, std::vector<BbiSegment> pieces) {
    BlockStore& st = pool_->store();
    const std::uint64_t B = st.block_bits();
    const std::uint64_t bits = leaf_bits(pieces);
    if (bits <= B) {
        Bitstream b = encode_leaf(pieces);
        b.pad_to(B);
        st.write_block(nodes_[static_cast<std::size_t>(leaf)].addr, b);
        nodes_[static_cast<std::size_t>(leaf)].count = bits;
        if (2 * bits < B) dirty_.push_back(leaf);
        return;
    }
    // Split into nearly equal blocks of about three quarters of B.
    const std::uint64_t q = 3 * B / 4;
    const std::uint64_t k = (bits + q - 1) / q;
    const auto chunks = pack(pieces, std::min<std::uint64_t>(B, bits / k + B / 8));
    if (nodes_[static_cast<std::size_t>(leaf)].parent < 0) {
        const int r = new_node(false);
        nodes_[static_cast<std::size_t>(r)].kids = {leaf};
        nodes_[static_cast<std::size_t>(r)].keys = {kMinKey};
        nodes_[static_cast<std::size_t>(leaf)].parent = r;
        root_ = r;
    }
    int prev = leaf;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        const int target = c == 0 ? leaf : new_node(true);
        Bitstream b = encode_leaf(chunks[c]);
        const std::uint64_t cb = b.size();
        require(cb <= B, ErrorCode::kPrecondition, "leaf split produced an oversized block");
        b.pad_to(B);
        st.write_block(nodes_[static_cast<std::size_t>(target)].addr, b);
        nodes_[static_cast<std::size_t>(target)].count = cb;
        if (c > 0)
            insert_kid(nodes_[static_cast<std::size_t>(leaf)].parent, prev, target,
                       BbiKey{chunks[c].front().id, chunks[c].front().positions.front()});
        if (2 * cb < B) dirty_.push_back(target);
        prev = target;
    }
    notify(nodes_[static_cast<std::size_t>(leaf)].addr);
}

int BufferedBitmapIndex::route(int node, BbiKey key) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    const auto it = std::upper_bound(n.keys.begin() + 1, n.keys.end(), key);
    return static_cast<int>(it - n.keys.begin()) - 1;
}

int BufferedBitmapIndex::route_to_leaf(BbiKey key) const {
    int v = root_;
    while (!nodes_[static_cast<std::size_t>(v)].leaf)
        v = nodes_[static_cast<std::size_t>(v)].kids[static_cast<std::size_t>(route(v, key))];
    return v;
}

BlockAddr BufferedBitmapIndex::leaf_for(BbiKey key) const {
    return nodes_[static_cast<std::size_t>(route_to_leaf(key))].addr;
}

std::vector<BbiRecord> BufferedBitmapIndex::peek_buffer(int node) const {
    if (node == root_) return root_buffer_;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    std::vector<BbiRecord> out(n.count);
    BitReader r(pool_->store().contents(), n.addr * pool_->store().block_bits());
    for (auto& rec : out) {
        rec.id = r.read_bits(id_bits_);
        rec.pos = r.read_bits(pos_bits_);
        rec.insert = r.read_bits(2) == 1;
    }
    return out;
}

std::vector<BbiRecord> BufferedBitmapIndex::load_buffer(int node) {
    if (node == root_) return root_buffer_;
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.count == 0) return {};
    pool_->store().charge_read(n.addr);
    return peek_buffer(node);
}

void BufferedBitmapIndex::store_buffer(int node, const std::vector<BbiRecord>& recs) {
    Node& n = nodes_[static_cast<std::size_t>(node)];
    if (node == root_) {
        root_buffer_ = recs;
        n.count = recs.size();
        return;
    }
    if (direct()) return;
    require(recs.size() <= capacity_, ErrorCode::kPrecondition, "node buffer overflow");
    n.count = recs.size();
    Bitstream b;
    for (const auto& r : recs) {
        b.push_bits(r.id, id_bits_);
        b.push_bits(r.pos, pos_bits_);
        b.push_bits(r.insert ? 1 : 2, 2);
    }
    b.pad_to(pool_->store().block_bits());
    pool_->store().write_block(n.addr, b);
}

void BufferedBitmapIndex::apply_to_leaf(int leaf, std::span<const BbiRecord> recs) {
    auto pieces = read_leaf(leaf);
    for (const auto& r : recs) apply_record(pieces, r);
    write_leaf(leaf, std::move(pieces));
}

// `recs` is the node's whole buffer, held by the caller. Records for the
// child receiving the most of them move down until the rest fits.
void BufferedBitmapIndex::flush_records(int node, std::vector<BbiRecord>& recs) {
    while (recs.size() > capacity_) {
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        std::vector<std::uint64_t> per(n.kids.size(), 0);
        std::vector<int> slot(recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            slot[i] = route(node, BbiKey{recs[i].id, recs[i].pos});
            ++per[static_cast<std::size_t>(slot[i])];
        }
        const auto best = static_cast<int>(std::max_element(per.begin(), per.end()) - per.begin());
        const int kid = n.kids[static_cast<std::size_t>(best)];
        std::vector<BbiRecord> moved, rest;
        for (std::size_t i = 0; i < recs.size(); ++i) (slot[i] == best ? moved : rest).push_back(recs[i]);
        recs = std::move(rest);
        if (nodes_[static_cast<std::size_t>(kid)].leaf) {
            apply_to_leaf(kid, moved);
        } else {
            auto kr = load_buffer(kid);
            kr.insert(kr.end(), moved.begin(), moved.end());
            flush_records(kid, kr);
            store_buffer(kid, kr);
        }
    }
}

void BufferedBitmapIndex::update(std::uint64_t id, std::uint64_t pos, bool insert) {
    require(pos >> pos_bits_ == 0 && (id_bits_ == 64 || id >> id_bits_ == 0), ErrorCode::kInvalidArgument,
            "record field out of range");
    const BbiRecord r{id, pos, insert};
    if (direct() || nodes_[static_cast<std::size_t>(root_)].leaf) {
        apply_to_leaf(route_to_leaf(BbiKey{id, pos}), std::span<const BbiRecord>(&r, 1));
        finish_op();
        return;
    }
    root_buffer_.push_back(r);
    nodes_[static_cast<std::size_t>(root_)].count = root_buffer_.size();
    if (root_buffer_.size() > capacity_) {
        auto recs = root_buffer_;
        flush_records(root_, recs);
        store_buffer(root_, recs);
    }
    finish_op();
}

void BufferedBitmapIndex::apply_batch(std::span<const BbiRecord> records) {
    require(direct(), ErrorCode::kPrecondition, "apply_batch needs a direct index");
    std::map<int, std::vector<BbiRecord>> by_leaf;
    for (const auto& r : records) by_leaf[route_to_leaf(BbiKey{r.id, r.pos})].push_back(r);
    for (const auto& [leaf, recs] : by_leaf) apply_to_leaf(leaf, recs);
    finish_op();
}

void BufferedBitmapIndex::apply_at(BlockAddr leaf, const BbiRecord& record) {
    require(direct(), ErrorCode::kPrecondition, "apply_at needs a direct index");
    const auto it = leaf_of_addr_.find(leaf);
    require(it != leaf_of_addr_.end(), ErrorCode::kAddress, "not a leaf block of this index");
    apply_to_leaf(it->second, std::span<const BbiRecord>(&record, 1));
    finish_op();
}

void BufferedBitmapIndex::finish_op() {
    while (!dirty_.empty()) {
        const int v = dirty_.back();
        dirty_.pop_back();
        const Node& n = nodes_[static_cast<std::size_t>(v)];
        if (!n.alive) continue;
        if (n.leaf) {
            merge_small(v);
        } else if (n.kids.size() > 2 * kFanout) {
            split_internal(v);
        }
    }
}

void BufferedBitmapIndex::merge_small(int leaf) {
    const std::uint64_t B = pool_->store().block_bits();
    const Node& n = nodes_[static_cast<std::size_t>(leaf)];
    if (2 * n.count >= B || n.parent < 0) return;
    Node& p = nodes_[static_cast<std::size_t>(n.parent)];
    const auto idx = static_cast<std::size_t>(std::find(p.kids.begin(), p.kids.end(), leaf) - p.kids.begin());
    int left, right;
    if (idx + 1 < p.kids.size()) {
        left = leaf;
        right = p.kids[idx + 1];
    } else if (idx > 0) {
        left = p.kids[idx - 1];
        right = leaf;
    } else {
        return;
    }
    const Node& ln = nodes_[static_cast<std::size_t>(left)];
    const Node& rn = nodes_[static_cast<std::size_t>(right)];
    if (!ln.leaf || !rn.leaf || ln.count + rn.count > B) return;
    auto pieces = read_leaf(left);
    for (const auto& s : read_leaf(right)) append_piece(pieces, s);
    const auto ri = static_cast<std::size_t>(std::find(p.kids.begin(), p.kids.end(), right) - p.kids.begin());
    p.kids.erase(p.kids.begin() + static_cast<std::ptrdiff_t>(ri));
    p.keys.erase(p.keys.begin() + static_cast<std::ptrdiff_t>(ri));
    const BlockAddr gone = rn.addr;
    free_node(right);
    write_leaf(left, std::move(pieces));
    notify(gone);
}

void BufferedBitmapIndex::split_internal(int v) {
    while (nodes_[static_cast<std::size_t>(v)].kids.size() > 2 * kFanout) {
        auto recs = load_buffer(v);
        const int w = new_node(false);
        Node& vn = nodes_[static_cast<std::size_t>(v)];
        Node& wn = nodes_[static_cast<std::size_t>(w)];
        const std::size_t mid = vn.kids.size() / 2;
        wn.kids.assign(vn.kids.begin() + static_cast<std::ptrdiff_t>(mid), vn.kids.end());
        wn.keys.assign(vn.keys.begin() + static_cast<std::ptrdiff_t>(mid), vn.keys.end());
        vn.kids.resize(mid);
        vn.keys.resize(mid);
        for (int k : wn.kids) nodes_[static_cast<std::size_t>(k)].parent = w;
        const BbiKey split = wn.keys.front();
        std::vector<BbiRecord> left, right;
        for (const auto& r : recs) (BbiKey{r.id, r.pos} < split ? left : right).push_back(r);
        if (v == root_) {
            const int r = new_node(false);
            nodes_[static_cast<std::size_t>(r)].kids = {v, w};
            nodes_[static_cast<std::size_t>(r)].keys = {kMinKey, split};
            nodes_[static_cast<std::size_t>(v)].parent = r;
            nodes_[static_cast<std::size_t>(w)].parent = r;
            root_ = r;
            root_buffer_.clear();
            store_buffer(v, left);
            store_buffer(w, right);
        } else {
            store_buffer(v, left);
            store_buffer(w, right);
            insert_kid(nodes_[static_cast<std::size_t>(v)].parent, v, w, split);
        }
    }
}

void BufferedBitmapIndex::collect(int v, BbiKey lo, BbiKey hi, BbiKey qlo, BbiKey qhi, unsigned depth,
                                  std::vector<LeafSpan>& leaves,
                                  std::vector<std::pair<unsigned, int>>& internals) const {
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    if (n.leaf) {
        leaves.push_back(LeafSpan{v, lo, hi});
        return;
    }
    internals.emplace_back(depth, v);
    for (std::size_t i = 0; i < n.kids.size(); ++i) {
        const BbiKey klo = i == 0 ? lo : n.keys[i];
        const BbiKey khi = i + 1 < n.kids.size() ? n.keys[i + 1] : hi;
        if (khi <= qlo || klo >= qhi) continue;
        collect(n.kids[i], klo, khi, qlo, qhi, depth + 1, leaves, internals);
    }
}

void BufferedBitmapIndex::read_range(std::uint64_t a, std::uint64_t b, std::vector<BbiSegment>& out) {
    out.clear();
    if (a >= b) return;
    std::vector<LeafSpan> leaves;
    std::vector<std::pair<unsigned, int>> internals;
    collect(root_, kMinKey, kMaxKey, BbiKey{a, 0}, BbiKey{b, 0}, 0, leaves, internals);
    std::vector<std::pair<unsigned, std::vector<BbiRecord>>> pend;
    for (const auto& [d, v] : internals) {
        std::vector<BbiRecord> keep;
        for (const auto& r : load_buffer(v))
            if (in_ids(r.id, a, b)) keep.push_back(r);
        if (!keep.empty()) pend.emplace_back(d, std::move(keep));
    }
    for (const auto& l : leaves)
        for (const auto& s : read_leaf(l.leaf))
            if (in_ids(s.id, a, b)) append_piece(out, s);
    // Deeper buffers hold older updates.
    std::stable_sort(pend.begin(), pend.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (const auto& [d, recs] : pend)
        for (const auto& r : recs) apply_record(out, r);
}

CompressedBitmap BufferedBitmapIndex::point_query(std::uint64_t id, std::uint64_t universe) {
    std::vector<BbiSegment> segs;
    read_range(id, id + 1, segs);
    if (segs.empty()) return CompressedBitmap(universe);
    return compress_positions(segs.front().positions, universe);
}

void BufferedBitmapIndex::replace_range(std::uint64_t a, std::uint64_t b, std::span<const BbiSegment> segments) {
    for (const auto& s : segments)
        require(in_ids(s.id, a, b), ErrorCode::kInvalidArgument, "replacement id outside the range");
    if (a >= b) return;
    std::vector<LeafSpan> leaves;
    std::vector<std::pair<unsigned, int>> internals;
    collect(root_, kMinKey, kMaxKey, BbiKey{a, 0}, BbiKey{b, 0}, 0, leaves, internals);
    for (const auto& [d, v] : internals) {
        if (nodes_[static_cast<std::size_t>(v)].count == 0) continue;
        auto recs = load_buffer(v);
        const auto old = recs.size();
        std::erase_if(recs, [&](const BbiRecord& r) { return in_ids(r.id, a, b); });
        if (recs.size() != old) store_buffer(v, recs);
    }
    for (const auto& l : leaves) {
        auto pieces = read_leaf(l.leaf);
        std::erase_if(pieces, [&](const BbiSegment& s) { return in_ids(s.id, a, b); });
        for (const auto& s : segments) {
            if (s.id < l.lo.id || s.id > l.hi.id) continue;
            auto first = s.positions.begin();
            auto last = s.positions.end();
            if (s.id == l.lo.id) first = std::lower_bound(first, last, l.lo.pos);
            if (s.id == l.hi.id) last = std::lower_bound(first, last, l.hi.pos);
            if (first == last) continue;
            pieces.push_back(BbiSegment{s.id, std::vector<std::uint64_t>(first, last)});
        }
        std::sort(pieces.begin(), pieces.end(), [](const BbiSegment& x, const BbiSegment& y) { return x.id < y.id; });
        write_leaf(l.leaf, std::move(pieces));
    }
    finish_op();
}

void BufferedBitmapIndex::drain_node(int node, std::vector<BbiRecord> recs) {
    if (!recs.empty()) store_buffer(node, {});
    const std::vector<int> kids = nodes_[static_cast<std::size_t>(node)].kids;
    std::map<int, std::vector<BbiRecord>> groups;
    for (const auto& r : recs) groups[kids[static_cast<std::size_t>(route(node, BbiKey{r.id, r.pos}))]].push_back(r);
    for (int kid : kids) {
        auto& g = groups[kid];
        if (nodes_[static_cast<std::size_t>(kid)].leaf) {
            if (!g.empty()) apply_to_leaf(kid, g);
        } else {
            auto kr = load_buffer(kid);
            kr.insert(kr.end(), g.begin(), g.end());
            drain_node(kid, std::move(kr));
        }
    }
}

void BufferedBitmapIndex::drain() {
    if (!nodes_[static_cast<std::size_t>(root_)].leaf) drain_node(root_, root_buffer_);
    finish_op();
}

std::vector<BbiSegment> BufferedBitmapIndex::stored() const {
    std::vector<LeafSpan> leaves;
    std::vector<std::pair<unsigned, int>> internals;
    collect(root_, kMinKey, kMaxKey, kMinKey, kMaxKey, 0, leaves, internals);
    std::vector<BbiSegment> out;
    for (const auto& l : leaves)
        for (const auto& s : peek_leaf(l.leaf)) append_piece(out, s);
    return out;
}

std::vector<BbiSegment> BufferedBitmapIndex::logical() const {
    std::vector<LeafSpan> leaves;
    std::vector<std::pair<unsigned, int>> internals;
    collect(root_, kMinKey, kMaxKey, kMinKey, kMaxKey, 0, leaves, internals);
    std::vector<BbiSegment> out;
    for (const auto& l : leaves)
        for (const auto& s : peek_leaf(l.leaf)) append_piece(out, s);
    std::stable_sort(internals.begin(), internals.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (const auto& [d, v] : internals)
        for (const auto& r : peek_buffer(v)) apply_record(out, r);
    return out;
}

std::uint64_t BufferedBitmapIndex::leaf_count() const noexcept { return leaf_of_addr_.size(); }

std::uint64_t BufferedBitmapIndex::internal_count() const noexcept {
    std::uint64_t c = 0;
    for (const auto& n : nodes_) c += n.alive && !n.leaf;
    return c;
}

std::uint64_t BufferedBitmapIndex::pending() const noexcept {
    std::uint64_t c = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].alive && !nodes_[i].leaf) c += static_cast<int>(i) == root_ ? root_buffer_.size() : nodes_[i].count;
    return c;
}

std::uint64_t BufferedBitmapIndex::height() const noexcept {
    std::uint64_t h = 0;
    for (int v = root_; !nodes_[static_cast<std::size_t>(v)].leaf; v = nodes_[static_cast<std::size_t>(v)].kids.front()) ++h;
    return h;
}

std::uint64_t BufferedBitmapIndex::exact_bits() const {
    std::uint64_t bits = 0;
    for (const auto& s : stored()) {
        bits += id_bits_ + gamma_bits(s.positions.size()) + gamma_bits(s.positions.front() + 1);
        for (std::size_t i = 1; i < s.positions.size(); ++i) bits += gamma_bits(s.positions[i] - s.positions[i - 1]);
    }
    return bits;
}

std::uint64_t BufferedBitmapIndex::memory_bits() const noexcept {
    std::uint64_t bits = root_buffer_.size() * record_bits();
    for (const auto& n : nodes_)
        if (n.alive) bits += 64 + n.kids.size() * (32 + id_bits_ + pos_bits_);
    return bits;
}

void BufferedBitmapIndex::check_node(int v, BbiKey lo, BbiKey hi, unsigned depth, unsigned& leaf_depth) const {
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    require(n.alive, ErrorCode::kPrecondition, "dead node reachable");
    if (n.leaf) {
        if (leaf_depth == ~0u) leaf_depth = depth;
        require(leaf_depth == depth, ErrorCode::kPrecondition, "leaves at different depths");
        const auto it = leaf_of_addr_.find(n.addr);
        require(it != leaf_of_addr_.end() && it->second == v, ErrorCode::kPrecondition, "leaf address map broken");
        const auto pieces = peek_leaf(v);
        require(leaf_bits(pieces) == n.count && n.count <= pool_->store().block_bits(), ErrorCode::kPrecondition,
                "leaf size mismatch");
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            require(i == 0 || pieces[i - 1].id < pieces[i].id, ErrorCode::kPrecondition, "leaf pieces out of order");
            const auto& p = pieces[i].positions;
            require(!p.empty() && std::is_sorted(p.begin(), p.end()) &&
                        std::adjacent_find(p.begin(), p.end()) == p.end(),
                    ErrorCode::kPrecondition, "leaf positions out of order");
            require(BbiKey{pieces[i].id, p.front()} >= lo && BbiKey{pieces[i].id, p.back()} < hi,
                    ErrorCode::kPrecondition, "leaf content outside its key range");
        }
        return;
    }
    require(!n.kids.empty() && n.kids.size() == n.keys.size() && n.kids.size() <= 2 * kFanout,
            ErrorCode::kPrecondition, "bad internal node shape");
    require(v == root_ || n.count <= capacity_, ErrorCode::kPrecondition, "buffer over capacity");
    for (const auto& r : peek_buffer(v))
        require(BbiKey{r.id, r.pos} >= lo && BbiKey{r.id, r.pos} < hi, ErrorCode::kPrecondition,
                "buffered update outside its node");
    for (std::size_t i = 0; i < n.kids.size(); ++i) {
        const BbiKey klo = i == 0 ? lo : n.keys[i];
        const BbiKey khi = i + 1 < n.kids.size() ? n.keys[i + 1] : hi;
        require(klo < khi, ErrorCode::kPrecondition, "routing keys not increasing");
        require(nodes_[static_cast<std::size_t>(n.kids[i])].parent == v, ErrorCode::kPrecondition, "parent link broken");
        check_node(n.kids[i], klo, khi, depth + 1, leaf_depth);
    }
}

void BufferedBitmapIndex::check() const {
    unsigned leaf_depth = ~0u;
    require(nodes_[static_cast<std::size_t>(root_)].parent == -1, ErrorCode::kPrecondition, "root has a parent");
    require(root_buffer_.size() <= capacity_, ErrorCode::kPrecondition, "root buffer over capacity");
    check_node(root_, kMinKey, kMaxKey, 0, leaf_depth);
}

}  // namespace rix
