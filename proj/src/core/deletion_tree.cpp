#include <algorithm>

#include "rangeindex/dynamic.hpp"
#include "rangeindex/errors.hpp"

namespace rix {

namespace {
constexpr unsigned kCountBits = 16;
constexpr unsigned kKeyBits = 64;
}  // namespace

DeletionTree::DeletionTree(BlockPool& pool) : pool_(&pool) {
    require(internal_capacity() >= 4 && leaf_capacity() >= 4, ErrorCode::kInvalidArgument,
            "block too small for the deletion tree");
}

std::uint64_t DeletionTree::leaf_capacity() const noexcept {
    return (pool_->store().block_bits() - 1 - kCountBits - 64) / kKeyBits;
}

std::uint64_t DeletionTree::internal_capacity() const noexcept {
    return (pool_->store().block_bits() - 1 - kCountBits) / (3 * 64);
}

Bitstream DeletionTree::encode(const NodeData& d) const {
    Bitstream b;
    b.push_bit(d.leaf);
    if (d.leaf) {
        b.push_bits(d.keys.size(), kCountBits);
        b.push_bits(d.next, 64);
        for (auto k : d.keys) b.push_bits(k, kKeyBits);
    } else {
        b.push_bits(d.entries.size(), kCountBits);
        for (const auto& e : d.entries) {
            b.push_bits(e.first, 64);
            b.push_bits(e.count, 64);
            b.push_bits(e.child, 64);
        }
    }
    b.pad_to(pool_->store().block_bits());
    return b;
}

DeletionTree::NodeData DeletionTree::decode(const Bitstream& bits, std::uint64_t off) const {
    BitReader r(bits, off);
    NodeData d;
    d.leaf = r.read_bit();
    const std::uint64_t n = r.read_bits(kCountBits);
    if (d.leaf) {
        d.next = r.read_bits(64);
        d.keys.resize(n);
        for (auto& k : d.keys) k = r.read_bits(kKeyBits);
    } else {
        d.entries.resize(n);
        for (auto& e : d.entries) {
            e.first = r.read_bits(64);
            e.count = r.read_bits(64);
            e.child = r.read_bits(64);
        }
    }
    return d;
}

DeletionTree::NodeData DeletionTree::read(BlockAddr a) {
    pool_->store().charge_read(a);
    return peek(a);
}

DeletionTree::NodeData DeletionTree::peek(BlockAddr a) const {
    return decode(pool_->store().contents(), a * pool_->store().block_bits());
}

void DeletionTree::write(BlockAddr a, const NodeData& d) { pool_->store().write_block(a, encode(d)); }

std::uint64_t DeletionTree::descend(std::uint64_t p, NodeData& leaf) {
    std::uint64_t before = 0;
    NodeData d = read(root_);
    while (!d.leaf) {
        std::size_t j = 0;
        while (j + 1 < d.entries.size() && d.entries[j + 1].first <= p) before += d.entries[j++].count;
        d = read(d.entries[j].child);
    }
    leaf = std::move(d);
    return before;
}

void DeletionTree::insert(std::uint64_t p) {
    if (!has_root_) {
        root_ = pool_->allocate();
        has_root_ = true;
        height_ = 1;
        NodeData d;
        d.keys = {p};
        write(root_, d);
        size_ = 1;
        return;
    }
    struct Step {
        BlockAddr addr;
        NodeData data;
        std::size_t slot;
    };
    std::vector<Step> path;
    BlockAddr a = root_;
    NodeData d = read(a);
    while (!d.leaf) {
        std::size_t j = 0;
        while (j + 1 < d.entries.size() && d.entries[j + 1].first <= p) ++j;
        const BlockAddr child = d.entries[j].child;
        path.push_back(Step{a, std::move(d), j});
        a = child;
        d = read(a);
    }
    const auto at = std::lower_bound(d.keys.begin(), d.keys.end(), p);
    require(at == d.keys.end() || *at != p, ErrorCode::kPrecondition, "position already deleted");
    d.keys.insert(at, p);
    ++size_;

    // Split upwards; `carry` is the new right sibling to add to the parent.
    std::optional<Entry> carry;
    if (d.keys.size() > leaf_capacity()) {
        NodeData right;
        right.keys.assign(d.keys.begin() + static_cast<std::ptrdiff_t>(d.keys.size() / 2), d.keys.end());
        d.keys.resize(d.keys.size() / 2);
        const BlockAddr ra = pool_->allocate();
        right.next = d.next;
        d.next = ra + 1;
        write(ra, right);
        carry = Entry{right.keys.front(), right.keys.size(), ra};
    }
    write(a, d);
    std::uint64_t below_count = d.keys.size();
    std::uint64_t below_first = d.keys.front();
    BlockAddr below = a;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        NodeData& pd = it->data;
        pd.entries[it->slot] = Entry{it->slot == 0 ? std::min(pd.entries[0].first, below_first) : below_first,
                                     below_count, below};
        if (carry) {
            pd.entries.insert(pd.entries.begin() + static_cast<std::ptrdiff_t>(it->slot) + 1, *carry);
            carry.reset();
        }
        if (pd.entries.size() > internal_capacity()) {
            NodeData right;
            right.leaf = false;
            right.entries.assign(pd.entries.begin() + static_cast<std::ptrdiff_t>(pd.entries.size() / 2),
                                 pd.entries.end());
            pd.entries.resize(pd.entries.size() / 2);
            const BlockAddr ra = pool_->allocate();
            write(ra, right);
            std::uint64_t c = 0;
            for (const auto& e : right.entries) c += e.count;
            carry = Entry{right.entries.front().first, c, ra};
        }
        write(it->addr, pd);
        below = it->addr;
        below_first = pd.entries.front().first;
        below_count = 0;
        for (const auto& e : pd.entries) below_count += e.count;
    }
    if (carry) {
        NodeData r;
        r.leaf = false;
        r.entries = {Entry{below_first, below_count, below}, *carry};
        root_ = pool_->allocate();
        write(root_, r);
        ++height_;
    }
}

bool DeletionTree::contains(std::uint64_t p) {
    if (!has_root_) return false;
    NodeData leaf;
    descend(p, leaf);
    return std::binary_search(leaf.keys.begin(), leaf.keys.end(), p);
}

std::uint64_t DeletionTree::rank(std::uint64_t p) {
    if (!has_root_) return 0;
    NodeData leaf;
    const std::uint64_t before = descend(p, leaf);
    return before + static_cast<std::uint64_t>(std::lower_bound(leaf.keys.begin(), leaf.keys.end(), p) - leaf.keys.begin());
}

// A deleted key q lies below the answer iff q - (number of deleted keys below q) <= c,
// and that quantity never decreases along the sorted keys.
std::uint64_t DeletionTree::to_original(std::uint64_t c) {
    if (!has_root_) return c;
    std::uint64_t before = 0;
    NodeData d = read(root_);
    while (!d.leaf) {
        std::size_t j = 0;
        std::uint64_t acc = before + d.entries[0].count;
        while (j + 1 < d.entries.size() && d.entries[j + 1].first - acc <= c) {
            ++j;
            acc += d.entries[j].count;
        }
        for (std::size_t i = 0; i < j; ++i) before += d.entries[i].count;
        d = read(d.entries[j].child);
    }
    std::uint64_t below = before;
    for (std::size_t t = 0; t < d.keys.size() && d.keys[t] - (before + t) <= c; ++t) ++below;
    return c + below;
}

std::uint64_t DeletionTree::to_current(std::uint64_t p) {
    if (!has_root_) return p;
    NodeData leaf;
    const std::uint64_t before = descend(p, leaf);
    const auto it = std::lower_bound(leaf.keys.begin(), leaf.keys.end(), p);
    if (it != leaf.keys.end() && *it == p) return kDeleted;
    return p - before - static_cast<std::uint64_t>(it - leaf.keys.begin());
}

void DeletionTree::to_current_sorted(std::vector<std::uint64_t>& positions) {
    if (!has_root_ || positions.empty()) return;
    NodeData leaf;
    std::uint64_t before = descend(positions.front(), leaf);
    std::size_t t = 0;
    for (auto& p : positions) {
        while (t == leaf.keys.size() && leaf.next != 0) {
            before += leaf.keys.size();
            leaf = read(leaf.next - 1);
            t = 0;
            if (!leaf.keys.empty() && leaf.keys.back() < p) continue;
        }
        while (t < leaf.keys.size() && leaf.keys[t] < p) {
            ++t;
            if (t == leaf.keys.size() && leaf.next != 0) {
                before += leaf.keys.size();
                leaf = read(leaf.next - 1);
                t = 0;
            }
        }
        p -= before + t;
    }
}

void DeletionTree::release(BlockAddr a, bool leaf) {
    if (!leaf) {
        const NodeData d = peek(a);
        for (const auto& e : d.entries) release(e.child, peek(e.child).leaf);
    }
    pool_->release(a);
}

void DeletionTree::clear() {
    if (has_root_) release(root_, peek(root_).leaf);
    has_root_ = false;
    size_ = 0;
    height_ = 0;
}

std::vector<std::uint64_t> DeletionTree::keys() const {
    std::vector<std::uint64_t> out;
    if (!has_root_) return out;
    NodeData d = peek(root_);
    while (!d.leaf) d = peek(d.entries.front().child);
    for (;;) {
        out.insert(out.end(), d.keys.begin(), d.keys.end());
        if (d.next == 0) break;
        d = peek(d.next - 1);
    }
    return out;
}

void DeletionTree::check() const {
    if (!has_root_) {
        require(size_ == 0, ErrorCode::kPrecondition, "deletion tree count mismatch");
        return;
    }
    struct Walk {
        const DeletionTree* t;
        unsigned leaf_depth = 0;
        std::uint64_t visit(BlockAddr a, unsigned depth, std::uint64_t& first) {
            const NodeData d = t->peek(a);
            if (d.leaf) {
                if (leaf_depth == 0) leaf_depth = depth;
                require(leaf_depth == depth && !d.keys.empty() && d.keys.size() <= t->leaf_capacity() &&
                            std::is_sorted(d.keys.begin(), d.keys.end()) &&
                            std::adjacent_find(d.keys.begin(), d.keys.end()) == d.keys.end(),
                        ErrorCode::kPrecondition, "bad deletion tree leaf");
                first = d.keys.front();
                return d.keys.size();
            }
            require(!d.entries.empty() && d.entries.size() <= t->internal_capacity(), ErrorCode::kPrecondition,
                    "bad deletion tree node");
            std::uint64_t total = 0;
            for (std::size_t i = 0; i < d.entries.size(); ++i) {
                std::uint64_t f = 0;
                const std::uint64_t c = visit(d.entries[i].child, depth + 1, f);
                require(c == d.entries[i].count && f == d.entries[i].first, ErrorCode::kPrecondition,
                        "deletion tree entry out of date");
                if (i == 0) first = f;
                total += c;
            }
            return total;
        }
    } w{this};
    std::uint64_t first = 0;
    require(w.visit(root_, 1, first) == size_ && w.leaf_depth == height_, ErrorCode::kPrecondition,
            "deletion tree size mismatch");
    const auto k = keys();
    require(k.size() == size_ && std::is_sorted(k.begin(), k.end()), ErrorCode::kPrecondition,
            "deletion tree leaves out of order");
}

}  // namespace rix
