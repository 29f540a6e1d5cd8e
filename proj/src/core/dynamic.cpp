#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "rangeindex/dynamic.hpp"
#include "rangeindex/errors.hpp"

namespace rix {

namespace {

constexpr std::uint64_t kNoPos = ~std::uint64_t{0};
constexpr std::uint64_t kEnd = ~std::uint64_t{0};

std::uint64_t branch_pow(unsigned level) {
    std::uint64_t p = 1;
    for (unsigned i = 0; i < level; ++i) {
        if (p > std::numeric_limits<std::uint64_t>::max() / DynamicIndex::kBranching / 4)
            return std::numeric_limits<std::uint64_t>::max() / 4;
        p *= DynamicIndex::kBranching;
    }
    return p;
}

// Greedy grouping of consecutive runs with weights: a group closes once its
// weight reaches `target`; a trailing group lighter than target/2 joins its
// predecessor. `begins` are run starts over [0, n).
std::vector<std::size_t> group(const std::vector<std::size_t>& begins, std::size_t n, std::uint64_t target) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    bool open = false;
    for (std::size_t j = 0; j < begins.size(); ++j) {
        if (!open) {
            start = begins[j];
            open = true;
        }
        const std::size_t end = j + 1 < begins.size() ? begins[j + 1] : n;
        if (end - start >= target) {
            out.push_back(start);
            open = false;
        }
    }
    if (open && (out.empty() || 2 * (n - start) >= target)) out.push_back(start);
    return out;
}

// Level-1 groups over single keys.
std::vector<std::size_t> group_singles(std::size_t n, std::uint64_t target) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < n; s += target) out.push_back(s);
    if (out.size() > 1 && 2 * (n - out.back()) < target) out.pop_back();
    return out;
}

}  // namespace

// ---------------------------------------------------------------- directory

void LastOccurrenceDirectory::reset(std::uint32_t sigma, unsigned stores) {
    stores_ = stores;
    fwd_.assign(std::size_t{sigma} * stores, kNone);
    back_.clear();
}

void LastOccurrenceDirectory::clear(std::uint32_t ch, unsigned store) {
    BlockAddr& f = fwd_[std::size_t{ch} * stores_ + store];
    if (f == kNone) return;
    auto it = back_.find(f);
    std::erase(it->second, std::pair{ch, store});
    if (it->second.empty()) back_.erase(it);
    f = kNone;
}

void LastOccurrenceDirectory::set(std::uint32_t ch, unsigned store, BlockAddr leaf) {
    clear(ch, store);
    fwd_[std::size_t{ch} * stores_ + store] = leaf;
    back_[leaf].emplace_back(ch, store);
}

std::optional<BlockAddr> LastOccurrenceDirectory::get(std::uint32_t ch, unsigned store) const {
    const std::size_t i = std::size_t{ch} * stores_ + store;
    if (i >= fwd_.size() || fwd_[i] == kNone) return std::nullopt;
    return fwd_[i];
}

std::vector<std::pair<std::uint32_t, unsigned>> LastOccurrenceDirectory::back_pointers(BlockAddr leaf) const {
    const auto it = back_.find(leaf);
    if (it == back_.end()) return {};
    return it->second;
}

bool LastOccurrenceDirectory::consistent() const {
    std::size_t n = 0;
    for (const auto& [addr, list] : back_) {
        for (const auto& [ch, s] : list) {
            const std::size_t i = std::size_t{ch} * stores_ + s;
            if (i >= fwd_.size() || fwd_[i] != addr) return false;
        }
        n += list.size();
    }
    return n == static_cast<std::size_t>(std::count_if(fwd_.begin(), fwd_.end(), [](BlockAddr a) { return a != kNone; }));
}

const char* variant_name(DynamicVariant v) noexcept {
    switch (v) {
        case DynamicVariant::kDirectAppend: return "direct-append";
        case DynamicVariant::kBufferedAppend: return "buffered-append";
        case DynamicVariant::kFullyDynamic: return "fully-dynamic";
    }
    return "?";
}

std::optional<DynamicVariant> parse_variant(const std::string& s) {
    for (auto v : {DynamicVariant::kDirectAppend, DynamicVariant::kBufferedAppend, DynamicVariant::kFullyDynamic})
        if (s == variant_name(v)) return v;
    return std::nullopt;
}

// ---------------------------------------------------------------- setup

DynamicIndex::DynamicIndex(std::span<const std::uint32_t> x, std::uint32_t sigma, BlockStore& store,
                           DynamicVariant variant, std::uint64_t seed)
    : pool_(store), variant_(variant), sigma_(sigma), seed_(seed) {
    require(sigma >= 1 && sigma < (1u << 31), ErrorCode::kInvalidArgument, "alphabet size out of range");
    require(store.block_bits() >= 1024, ErrorCode::kInvalidArgument, "dynamic index needs B >= 1024");
    require(x.size() < (std::uint64_t{1} << kPosBits), ErrorCode::kInvalidArgument, "string too long");
    for (auto c : x) require(c < sigma, ErrorCode::kInvalidArgument, "character outside the alphabet");
    total_ = x.size();
    if (variant_ == DynamicVariant::kFullyDynamic) {
        deletions_.emplace(pool_);
        column_width_ = bit_width_for(sigma_);
        column_reset(x);
    }
    if (variant_ == DynamicVariant::kDirectAppend) {
        last_pos_.assign(sigma_, kNoPos);
        for (std::uint64_t i = 0; i < x.size(); ++i) last_pos_[x[i]] = i;
    }
    std::vector<std::uint64_t> keys(x.size());
    for (std::uint64_t i = 0; i < x.size(); ++i) keys[i] = make_key(x[i], i);
    std::sort(keys.begin(), keys.end());
    global_rebuild(std::move(keys));
    stats_ = {};
}

unsigned DynamicIndex::store_for_depth(unsigned d) const {
    const auto it = std::lower_bound(store_depths_.begin(), store_depths_.end(), d);
    require(it != store_depths_.end(), ErrorCode::kPrecondition, "depth below the deepest store");
    return static_cast<unsigned>(it - store_depths_.begin());
}

int DynamicIndex::store_of(int v) const {
    if (node(v).leaf) return static_cast<int>(store_for_depth(depth(v)));
    const auto it = std::lower_bound(store_depths_.begin(), store_depths_.end(), depth(v));
    if (it == store_depths_.end() || *it != depth(v)) return -1;
    return static_cast<int>(it - store_depths_.begin());
}

int DynamicIndex::frontier_in(const std::vector<int>& path, unsigned s) const {
    const unsigned D = store_depths_[s];
    const int leaf = path.back();
    if (D < depth(leaf)) return path[D];
    return store_of(leaf) == static_cast<int>(s) ? leaf : -1;
}

bool DynamicIndex::in_bounds(int v) const {
    const WNode& n = node(v);
    const std::uint64_t p = branch_pow(n.level);
    return 2 * n.weight >= p && n.weight <= 2 * p;
}

int DynamicIndex::new_wnode() {
    int id;
    if (!free_nodes_.empty()) {
        id = free_nodes_.back();
        free_nodes_.pop_back();
        node(id) = WNode{};
    } else {
        id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
    }
    return id;
}

void DynamicIndex::free_subtree(int v, bool keep_root) {
    for (int k : node(v).kids) free_subtree(k, false);
    WNode& n = node(v);
    n.kids.clear();
    if (n.buf_addr) pool_.release(*n.buf_addr);
    n.buf_addr.reset();
    n.buf_count = 0;
    if (!keep_root) {
        n.alive = false;
        free_nodes_.push_back(v);
    }
}

int DynamicIndex::route(int v, std::uint64_t key) const {
    const auto& kids = node(v).kids;
    std::size_t lo = 1, hi = kids.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (node(kids[mid]).sep <= key) lo = mid + 1;
        else hi = mid;
    }
    return kids[lo - 1];
}

std::vector<int> DynamicIndex::path_to(std::uint64_t key) const {
    std::vector<int> path{root_};
    while (!node(path.back()).leaf) path.push_back(route(path.back(), key));
    return path;
}

void DynamicIndex::collect_leaves(int v, std::vector<int>& out) const {
    if (node(v).leaf) {
        out.push_back(v);
        return;
    }
    for (int k : node(v).kids) collect_leaves(k, out);
}

void DynamicIndex::collect_frontier(int v, unsigned s, std::vector<int>& out) const {
    const unsigned D = store_depths_[s];
    const unsigned d = depth(v);
    if (d == D || (node(v).leaf && d < D && store_for_depth(d) == s)) {
        out.push_back(v);
        return;
    }
    if (node(v).leaf || d > D) return;
    for (int k : node(v).kids) collect_frontier(k, s, out);
}

void DynamicIndex::set_height(unsigned h) {
    height_ = h;
    store_depths_.clear();
    if (h == 0) {
        store_depths_.push_back(0);
        return;
    }
    for (unsigned d = 1; d < h; d *= 2) store_depths_.push_back(d);
    store_depths_.push_back(h);
}

// ---------------------------------------------------------------- rebuilds

void DynamicIndex::build_subtree(int u, std::span<const std::uint64_t> keys) {
    const std::size_t n = keys.size();
    const unsigned top = node(u).level;
    node(u).weight = n;
    node(u).kids.clear();
    if (n == 0 || key_char(keys.front()) == key_char(keys.back())) {
        node(u).leaf = true;
        if (n > 0) {
            node(u).ch = key_char(keys.front());
            node(u).key0 = keys.front();
        }
        return;
    }
    require(top >= 1, ErrorCode::kPrecondition, "mixed characters at level 0");
    // begins[i]: starts of the level-i groups; level 0 is every key.
    std::vector<std::vector<std::size_t>> begins(top);
    for (unsigned i = 1; i < top; ++i)
        begins[i] = i == 1 ? group_singles(n, kBranching) : group(begins[i - 1], n, branch_pow(i));

    struct Item {
        int v;
        std::size_t b, e;
    };
    std::vector<Item> stack{{u, 0, n}};
    while (!stack.empty()) {
        const Item it = stack.back();
        stack.pop_back();
        WNode& p = node(it.v);
        p.weight = it.e - it.b;
        if (p.weight == 0 || key_char(keys[it.b]) == key_char(keys[it.e - 1])) {
            p.leaf = true;
            if (p.weight > 0) {
                p.ch = key_char(keys[it.b]);
                p.key0 = keys[it.b];
            }
            continue;
        }
        p.leaf = false;
        const unsigned cl = p.level - 1;
        std::vector<std::size_t> starts;
        if (cl == 0) {
            for (std::size_t k = it.b; k < it.e; ++k) starts.push_back(k);
        } else {
            const auto& bl = begins[cl];
            auto first = std::lower_bound(bl.begin(), bl.end(), it.b);
            auto last = std::lower_bound(first, bl.end(), it.e);
            starts.assign(first, last);
        }
        const std::uint64_t psep = p.sep, phi = p.hi;
        std::vector<int> kids;
        for (std::size_t j = 0; j < starts.size(); ++j) {
            const int k = new_wnode();
            WNode& kn = node(k);
            kn.level = cl;
            kn.parent = it.v;
            kn.sep = j == 0 ? psep : keys[starts[j]];
            kids.push_back(k);
        }
        for (std::size_t j = 0; j < kids.size(); ++j) {
            node(kids[j]).hi = j + 1 < kids.size() ? node(kids[j + 1]).sep : phi;
            stack.push_back(Item{kids[j], starts[j], j + 1 < starts.size() ? starts[j + 1] : it.e});
        }
        node(it.v).kids = std::move(kids);
    }
}

std::vector<BbiSegment> DynamicIndex::segments_for(int u, unsigned s, std::span<const std::uint64_t> keys) const {
    std::vector<int> fr;
    collect_frontier(u, s, fr);
    std::vector<BbiSegment> segs;
    for (int f : fr) {
        const auto b = std::lower_bound(keys.begin(), keys.end(), node(f).sep);
        const auto e = std::lower_bound(b, keys.end(), node(f).hi);
        if (b == e) continue;
        BbiSegment seg{node(f).sep, {}};
        for (auto it = b; it != e; ++it) seg.positions.push_back(key_pos(*it));
        std::sort(seg.positions.begin(), seg.positions.end());
        segs.push_back(std::move(seg));
    }
    return segs;
}

void DynamicIndex::global_rebuild(std::vector<std::uint64_t> keys) {
    const IOStats before = store().snapshot();
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    if (root_ >= 0) free_subtree(root_, false);
    nodes_.clear();
    free_nodes_.clear();
    root_wbuffer_.clear();

    unsigned h = 0;
    if (!keys.empty()) {
        std::vector<std::size_t> lv = group_singles(keys.size(), kBranching);
        h = 1;
        while (lv.size() > 1) {
            ++h;
            lv = group(lv, keys.size(), branch_pow(h));
        }
    }
    set_height(h);
    root_ = new_wnode();
    node(root_).level = h;
    node(root_).sep = 0;
    node(root_).hi = kEnd;
    build_subtree(root_, keys);

    for (auto& st : stores_) st.release_all();
    stores_.clear();
    stores_.reserve(store_depths_.size());
    const unsigned id_bits = bit_width_for(sigma_) + kPosBits;
    for (unsigned s = 0; s < store_depths_.size(); ++s) {
        stores_.emplace_back(pool_, id_bits, kPosBits, variant_ != DynamicVariant::kFullyDynamic);
        if (variant_ == DynamicVariant::kDirectAppend)
            stores_.back().set_observer([this](BlockAddr a) { on_leaf_moved(a); });
        const auto segs = segments_for(root_, s, keys);
        stores_.back().bulk_load(segs);
    }
    if (variant_ == DynamicVariant::kDirectAppend) refresh_directory();
    ++stats_.global_rebuilds;
    stats_.rebuilt_weight += keys.size();
    stats_.rebuild_io += store().snapshot().total() - before.total();
}

std::vector<std::uint64_t> DynamicIndex::gather_keys(int u) {
    std::vector<std::uint64_t> keys;
    std::vector<int> leaves;
    collect_leaves(u, leaves);
    std::map<unsigned, std::vector<int>> by_store;
    for (int l : leaves) by_store[store_for_depth(depth(l))].push_back(l);
    std::vector<BbiSegment> segs;
    for (const auto& [s, list] : by_store) {
        std::unordered_map<std::uint64_t, std::uint32_t> char_of;
        for (int l : list) char_of[node(l).sep] = node(l).ch;
        for (std::size_t i = 0; i < list.size();) {
            std::size_t j = i + 1;
            while (j < list.size() && node(list[j - 1]).hi == node(list[j]).sep) ++j;
            stores_[s].read_range(node(list[i]).sep, node(list[j - 1]).hi, segs);
            for (const auto& seg : segs) {
                const std::uint32_t ch = char_of.at(seg.id);
                for (auto p : seg.positions) keys.push_back(make_key(ch, p));
            }
            i = j;
        }
    }
    if (variant_ == DynamicVariant::kBufferedAppend) {
        // Pending appends: taken from the subtree, copied from the ancestors.
        std::vector<int> stack{u};
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            if (node(v).leaf) continue;
            auto recs = load_wbuffer(v);
            keys.insert(keys.end(), recs.begin(), recs.end());
            store_wbuffer(v, {});
            for (int k : node(v).kids) stack.push_back(k);
        }
        for (int a = node(u).parent; a >= 0; a = node(a).parent)
            for (auto k : load_wbuffer(a))
                if (k >= node(u).sep && k < node(u).hi) keys.push_back(k);
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

void DynamicIndex::rebuild(int u, std::span<const std::uint64_t> extra) {
    if (u == root_) {
        auto keys = gather_keys(u);
        keys.insert(keys.end(), extra.begin(), extra.end());
        global_rebuild(std::move(keys));
        return;
    }
    const IOStats before = store().snapshot();
    auto keys = gather_keys(u);
    keys.insert(keys.end(), extra.begin(), extra.end());
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    free_subtree(u, true);
    build_subtree(u, keys);
    const unsigned du = depth(u);
    for (unsigned s = 0; s < store_depths_.size(); ++s) {
        if (store_depths_[s] < du) continue;
        const auto segs = segments_for(u, s, keys);
        stores_[s].replace_range(node(u).sep, node(u).hi, segs);
    }
    if (variant_ == DynamicVariant::kDirectAppend) {
        std::set<std::uint32_t> chars;
        for (auto k : keys) chars.insert(key_char(k));
        for (auto c : chars) refresh_directory_entry(c);
    }
    ++stats_.rebuilds;
    stats_.rebuilt_weight += keys.size();
    stats_.rebuild_io += store().snapshot().total() - before.total();
}

void DynamicIndex::check_path(std::uint64_t key) {
    const WNode& r = node(root_);
    if (r.weight > 2 * branch_pow(r.level)) {
        global_rebuild(gather_keys(root_));
        return;
    }
    const auto path = path_to(key);
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (in_bounds(path[i])) continue;
        rebuild(path[i - 1], {});
        return;
    }
}

bool DynamicIndex::rebuild_if_unbalanced(std::size_t v) {
    const int u = static_cast<int>(v);
    require(v < nodes_.size() && node(u).alive, ErrorCode::kInvalidArgument, "no such node");
    bool bad = u == root_ && node(u).weight > 2 * branch_pow(node(u).level);
    for (int k : node(u).kids) bad = bad || !in_bounds(k);
    if (bad) rebuild(u, {});
    return bad;
}

void DynamicIndex::force_rebuild(std::size_t v) {
    require(v < nodes_.size() && node(static_cast<int>(v)).alive, ErrorCode::kInvalidArgument, "no such node");
    rebuild(static_cast<int>(v), {});
}

// ---------------------------------------------------------------- directory upkeep

void DynamicIndex::refresh_directory() {
    directory_.reset(sigma_, static_cast<unsigned>(stores_.size()));
    dir_dirty_.clear();
    for (std::uint32_t c = 0; c < sigma_; ++c)
        if (last_pos_[c] != kNoPos) refresh_directory_entry(c);
}

void DynamicIndex::refresh_directory_entry(std::uint32_t ch) {
    const unsigned ns = static_cast<unsigned>(stores_.size());
    if (last_pos_[ch] == kNoPos) {
        for (unsigned s = 0; s < ns; ++s) directory_.clear(ch, s);
        return;
    }
    const auto path = path_to(make_key(ch, last_pos_[ch]));
    for (unsigned s = 0; s < ns; ++s) {
        const int f = frontier_in(path, s);
        if (f < 0) directory_.clear(ch, s);
        else directory_.set(ch, s, stores_[s].leaf_for(BbiKey{node(f).sep, kNoPos}));
    }
}

void DynamicIndex::on_leaf_moved(BlockAddr a) {
    for (const auto& [ch, s] : directory_.back_pointers(a)) dir_dirty_.push_back(ch);
}

// ---------------------------------------------------------------- updates

void DynamicIndex::begin_update() {
    if (update_depth_++ == 0) op_start_ = store().snapshot();
}

void DynamicIndex::end_update() {
    if (--update_depth_ != 0) return;
    if (variant_ == DynamicVariant::kDirectAppend) {
        auto dirty = std::move(dir_dirty_);
        dir_dirty_.clear();
        std::sort(dirty.begin(), dirty.end());
        dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
        for (auto c : dirty) refresh_directory_entry(c);
    }
    ++stats_.updates;
    stats_.update_io += store().snapshot().total() - op_start_.total();
}

void DynamicIndex::check_char(std::uint32_t ch) const {
    require(ch < sigma_, ErrorCode::kInvalidArgument, "character outside the alphabet");
}

void DynamicIndex::store_update(const std::vector<int>& path, std::uint64_t pos, bool insert, unsigned below_depth,
                                bool use_directory) {
    const std::uint32_t ch = node(path.back()).ch;
    for (unsigned s = 0; s < store_depths_.size(); ++s) {
        if (store_depths_[s] >= below_depth) continue;
        const int f = frontier_in(path, s);
        if (f < 0) continue;
        const std::uint64_t id = node(f).sep;
        if (variant_ == DynamicVariant::kDirectAppend) {
            std::optional<BlockAddr> leaf;
            if (use_directory) leaf = directory_.get(ch, s);
            if (!leaf) leaf = stores_[s].leaf_for(BbiKey{id, pos});
            stores_[s].apply_at(*leaf, BbiRecord{id, pos, insert});
        } else {
            stores_[s].update(id, pos, insert);
        }
    }
}

void DynamicIndex::insert_occ(std::uint32_t ch, std::uint64_t pos) {
    const std::uint64_t key = make_key(ch, pos);
    auto path = path_to(key);
    int leaf = path.back();
    // The directory names the blocks of the frontier nodes holding ch's last
    // occurrence, which are on this path when the leaf already holds ch.
    const bool use_directory = variant_ == DynamicVariant::kDirectAppend && node(leaf).weight > 0 &&
                               node(leaf).ch == ch && last_pos_[ch] != kNoPos;
    if (leaf != root_ && node(leaf).level == 0 && node(leaf).weight > 0) {
        // A level-0 node holds one occurrence; a new one becomes its own
        // level-0 sibling, or forces a rebuild when it would precede the
        // parent's first occurrence.
        const int parent = node(leaf).parent;
        if (key < node(leaf).key0) {
            for (int v : path) ++node(v).weight;
            if (variant_ == DynamicVariant::kBufferedAppend && !node(root_).leaf) root_wbuffer_.push_back(key);
            else if (parent != root_) store_update(path, pos, true, depth(parent), false);
            const std::vector<std::uint64_t> extra{key};
            rebuild(parent, extra);
            check_path(key);
            return;
        }
        const int fresh = new_wnode();
        WNode& f = node(fresh);
        f.level = 0;
        f.parent = parent;
        f.sep = key;
        f.hi = node(leaf).hi;
        f.ch = ch;
        node(leaf).hi = key;
        auto& kids = node(parent).kids;
        kids.insert(std::find(kids.begin(), kids.end(), leaf) + 1, fresh);
        path.back() = fresh;
        leaf = fresh;
    }
    const bool empty = node(leaf).weight == 0;
    const bool match = empty || node(leaf).ch == ch;
    for (int v : path) ++node(v).weight;
    if (empty) {
        node(leaf).ch = ch;
        node(leaf).key0 = key;
    }

    if (variant_ == DynamicVariant::kBufferedAppend) {
        if (node(root_).leaf) {
            if (match) deliver(root_, {key});
        } else {
            root_wbuffer_.push_back(key);
        }
        if (!match) {
            // The new key sits in the root buffer or is passed explicitly.
            const std::vector<std::uint64_t> extra{key};
            rebuild(leaf, extra);
        } else if (root_wbuffer_.size() > wcapacity()) {
            wflush(root_, root_wbuffer_);
        }
        check_path(key);
        return;
    }

    if (match) {
        store_update(path, pos, true, ~0u, use_directory);
    } else {
        // Only leaves above level 0 get here.
        if (leaf != root_) store_update(path, pos, true, depth(leaf), false);
        const std::vector<std::uint64_t> extra{key};
        rebuild(leaf, extra);
    }
    check_path(key);
}

void DynamicIndex::delete_occ(std::uint32_t ch, std::uint64_t pos) {
    const std::uint64_t key = make_key(ch, pos);
    const auto path = path_to(key);
    const int leaf = path.back();
    require(node(leaf).weight > 0 && node(leaf).ch == ch, ErrorCode::kPrecondition, "occurrence not indexed");
    for (int v : path) --node(v).weight;
    store_update(path, pos, false, ~0u, false);
    check_path(key);
}

void DynamicIndex::append(std::uint32_t ch) {
    check_char(ch);
    require(total_ + 1 < (std::uint64_t{1} << kPosBits), ErrorCode::kInvalidArgument, "position space exhausted");
    begin_update();
    const std::uint64_t pos = total_++;
    if (variant_ == DynamicVariant::kFullyDynamic) column_set(pos, ch);
    insert_occ(ch, pos);
    if (variant_ == DynamicVariant::kDirectAppend) {
        last_pos_[ch] = pos;
        refresh_directory_entry(ch);
    }
    end_update();
}

void DynamicIndex::change(std::uint64_t i, std::uint32_t ch) {
    require(variant_ == DynamicVariant::kFullyDynamic, ErrorCode::kUnsupported, "change needs the fully-dynamic variant");
    check_char(ch);
    require(i < size(), ErrorCode::kInvalidArgument, "position out of range");
    begin_update();
    const std::uint64_t orig = deletions_->to_original(i);
    const std::uint32_t old = column_get(orig);
    if (old != ch) {
        delete_occ(old, orig);
        insert_occ(ch, orig);
        column_set(orig, ch);
    }
    end_update();
}

void DynamicIndex::erase(std::uint64_t i) {
    require(variant_ == DynamicVariant::kFullyDynamic, ErrorCode::kUnsupported, "delete needs the fully-dynamic variant");
    require(i < size(), ErrorCode::kInvalidArgument, "position out of range");
    begin_update();
    const std::uint64_t orig = deletions_->to_original(i);
    const std::uint32_t old = column_get(orig);
    delete_occ(old, orig);
    column_set(orig, sentinel());
    deletions_->insert(orig);
    maybe_compact();
    end_update();
}

void DynamicIndex::maybe_compact() {
    if (2 * deletions_->size() <= total_) return;
    const IOStats before = store().snapshot();
    std::vector<std::uint32_t> live;
    live.reserve(size());
    const std::uint64_t per = column_per_block();
    for (std::size_t b = 0; b < column_blocks_.size(); ++b) {
        const Bitstream blk = store().read_block(column_blocks_[b]);
        for (std::uint64_t j = 0; j < per && b * per + j < total_; ++j) {
            const auto c = static_cast<std::uint32_t>(blk.get_bits(j * column_width_, column_width_));
            if (c != sentinel()) live.push_back(c);
        }
    }
    deletions_->clear();
    column_reset(live);
    total_ = live.size();
    std::vector<std::uint64_t> keys(live.size());
    for (std::uint64_t i = 0; i < live.size(); ++i) keys[i] = make_key(live[i], i);
    global_rebuild(std::move(keys));
    ++stats_.compactions;
    stats_.rebuild_io += store().snapshot().total() - before.total();
}

void DynamicIndex::drain() {
    if (variant_ == DynamicVariant::kBufferedAppend) {
        std::vector<int> stack{root_};
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            if (node(v).leaf) continue;
            auto recs = load_wbuffer(v);
            std::map<int, std::vector<std::uint64_t>> groups;
            for (auto k : recs) groups[route(v, k)].push_back(k);
            store_wbuffer(v, {});
            for (auto& [k, g] : groups) deliver(k, std::move(g));
            for (int k : node(v).kids) stack.push_back(k);
        }
    }
    for (auto& st : stores_) st.drain();
}

// ---------------------------------------------------------------- buffered-append

unsigned DynamicIndex::wrecord_bits() const noexcept { return bit_width_for(sigma_) + kPosBits; }

std::uint64_t DynamicIndex::wcapacity() const noexcept { return store().block_bits() / wrecord_bits(); }

bool DynamicIndex::explicit_node(int v) const { return store_of(v) >= 0; }

std::vector<std::uint64_t> DynamicIndex::peek_wbuffer(int v) const {
    if (v == root_) return root_wbuffer_;
    const WNode& n = node(v);
    std::vector<std::uint64_t> out(n.buf_count);
    if (n.buf_count == 0) return out;
    BitReader r(store().contents(), *n.buf_addr * store().block_bits());
    const unsigned cb = bit_width_for(sigma_);
    for (auto& k : out) {
        const auto c = static_cast<std::uint32_t>(r.read_bits(cb));
        k = make_key(c, r.read_bits(kPosBits));
    }
    return out;
}

std::vector<std::uint64_t> DynamicIndex::load_wbuffer(int v) {
    if (v == root_) return root_wbuffer_;
    if (node(v).buf_count == 0) return {};
    store().charge_read(*node(v).buf_addr);
    return peek_wbuffer(v);
}

void DynamicIndex::store_wbuffer(int v, const std::vector<std::uint64_t>& keys) {
    if (v == root_) {
        root_wbuffer_ = keys;
        return;
    }
    WNode& n = node(v);
    if (keys.empty()) {
        if (n.buf_addr) pool_.release(*n.buf_addr);
        n.buf_addr.reset();
        n.buf_count = 0;
        return;
    }
    require(keys.size() <= wcapacity(), ErrorCode::kPrecondition, "node buffer overflow");
    if (!n.buf_addr) n.buf_addr = pool_.allocate();
    n.buf_count = keys.size();
    Bitstream b;
    const unsigned cb = bit_width_for(sigma_);
    for (auto k : keys) {
        b.push_bits(key_char(k), cb);
        b.push_bits(key_pos(k), kPosBits);
    }
    b.pad_to(store().block_bits());
    store().write_block(*n.buf_addr, b);
}

void DynamicIndex::wflush(int v, std::vector<std::uint64_t>& keys) {
    while (keys.size() > wcapacity()) {
        std::map<int, std::vector<std::uint64_t>> groups;
        for (auto k : keys) groups[route(v, k)].push_back(k);
        int best = -1;
        std::size_t most = 0;
        for (int k : node(v).kids) {
            const auto it = groups.find(k);
            if (it != groups.end() && it->second.size() > most) {
                best = k;
                most = it->second.size();
            }
        }
        std::vector<std::uint64_t> rest;
        for (auto k : keys)
            if (route(v, k) != best) rest.push_back(k);
        keys = std::move(rest);
        ++stats_.flushes;
        deliver(best, std::move(groups[best]));
    }
}

// Records entering a node are applied to its bitmap when the node has one.
void DynamicIndex::deliver(int v, std::vector<std::uint64_t> keys) {
    if (keys.empty()) return;
    const int s = store_of(v);
    if (s >= 0) {
        std::vector<BbiRecord> recs;
        recs.reserve(keys.size());
        for (auto k : keys) recs.push_back(BbiRecord{node(v).sep, key_pos(k), true});
        stores_[static_cast<std::size_t>(s)].apply_batch(recs);
    }
    if (node(v).leaf) return;
    auto buf = load_wbuffer(v);
    buf.insert(buf.end(), keys.begin(), keys.end());
    wflush(v, buf);
    store_wbuffer(v, buf);
}

// ---------------------------------------------------------------- queries

void DynamicIndex::check_range(std::uint32_t lo, std::uint32_t hi) const {
    require(lo <= hi && hi < sigma_, ErrorCode::kInvalidArgument, "bad character range");
}

void DynamicIndex::decompose(int v, std::uint64_t lo, std::uint64_t hi, std::vector<int>& out) const {
    const WNode& n = node(v);
    if (n.leaf) {
        const std::uint64_t k = make_key(n.ch, 0);
        if (n.weight > 0 && k >= lo && k < hi) out.push_back(v);
        return;
    }
    if (n.hi <= lo || n.sep >= hi || n.weight == 0) return;
    if (n.sep >= lo && n.hi <= hi) {
        out.push_back(v);
        return;
    }
    for (int k : n.kids) decompose(k, lo, hi, out);
}

std::uint64_t DynamicIndex::count_range(std::uint32_t lo, std::uint32_t hi) {
    check_range(lo, hi);
    std::vector<int> sel;
    decompose(root_, make_key(lo, 0), make_key(hi + 1, 0), sel);
    std::uint64_t z = 0;
    for (int v : sel) z += node(v).weight;
    return z;
}

std::vector<std::uint64_t> DynamicIndex::query_original(std::uint32_t lo, std::uint32_t hi) {
    check_range(lo, hi);
    const std::uint64_t klo = make_key(lo, 0), khi = make_key(hi + 1, 0);
    std::vector<int> sel;
    decompose(root_, klo, khi, sel);
    std::vector<std::uint64_t> out;
    std::map<unsigned, std::vector<int>> by_store;
    for (int v : sel) by_store[store_for_depth(depth(v))].push_back(v);
    std::vector<BbiSegment> segs;
    for (const auto& [s, list] : by_store) {
        for (std::size_t i = 0; i < list.size();) {
            std::size_t j = i + 1;
            while (j < list.size() && node(list[j - 1]).hi == node(list[j]).sep) ++j;
            stores_[s].read_range(node(list[i]).sep, node(list[j - 1]).hi, segs);
            for (const auto& seg : segs) out.insert(out.end(), seg.positions.begin(), seg.positions.end());
            i = j;
        }
    }
    if (variant_ == DynamicVariant::kBufferedAppend && !node(root_).leaf) {
        // Appends not yet applied to the bitmaps read above wait in buffers
        // of strict ancestors of those bitmaps' nodes.
        std::set<int> holders;
        for (int v : sel) {
            for (int a = node(v).parent; a >= 0; a = node(a).parent) holders.insert(a);
            const unsigned D = store_depths_[store_for_depth(depth(v))];
            std::vector<int> stack{v};
            while (!stack.empty()) {
                const int w = stack.back();
                stack.pop_back();
                if (node(w).leaf || depth(w) >= D) continue;
                holders.insert(w);
                for (int k : node(w).kids) stack.push_back(k);
            }
        }
        for (int w : holders)
            for (auto k : load_wbuffer(w))
                if (k >= klo && k < khi) out.push_back(key_pos(k));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

CompressedBitmap DynamicIndex::range_query(std::uint32_t lo, std::uint32_t hi) {
    auto pos = query_original(lo, hi);
    if (pos.empty()) return CompressedBitmap(size());
    if (deletions_) deletions_->to_current_sorted(pos);
    return compress_positions(pos, size());
}

ApproxResult DynamicIndex::approx_query(std::uint32_t lo, std::uint32_t hi, double eps) {
    require(eps > 0 && eps <= 1, ErrorCode::kInvalidArgument, "eps must lie in (0, 1]");
    CompressedBitmap exact = range_query(lo, hi);
    if (size() == 0) return ApproxResult(std::move(exact));
    const HashFamily family = HashFamily::create(size(), seed_);
    const auto j = select_level(exact.cardinality(), eps, family.k());
    if (!j) return ApproxResult(std::move(exact));
    std::vector<std::uint64_t> hashed;
    hashed.reserve(exact.cardinality());
    GapCursor cur(exact);
    while (auto p = cur.next()) hashed.push_back(family.h(*j, *p));
    std::sort(hashed.begin(), hashed.end());
    hashed.erase(std::unique(hashed.begin(), hashed.end()), hashed.end());
    return ApproxResult(compress_positions(hashed, HashFamily::universe(*j)), *j, family);
}

// ---------------------------------------------------------------- column

std::uint64_t DynamicIndex::column_per_block() const noexcept { return store().block_bits() / column_width_; }

std::uint32_t DynamicIndex::column_get(std::uint64_t orig) {
    const std::uint64_t per = column_per_block();
    store().charge_read(column_blocks_[orig / per]);
    return column_peek(orig);
}

std::uint32_t DynamicIndex::column_peek(std::uint64_t orig) const {
    const std::uint64_t per = column_per_block();
    const std::uint64_t bit = column_blocks_[orig / per] * store().block_bits() + (orig % per) * column_width_;
    return static_cast<std::uint32_t>(store().contents().get_bits(bit, column_width_));
}

void DynamicIndex::column_set(std::uint64_t orig, std::uint32_t ch) {
    const std::uint64_t per = column_per_block();
    const std::uint64_t b = orig / per;
    Bitstream blk;
    if (b == column_blocks_.size()) {
        column_blocks_.push_back(pool_.allocate());
        blk = Bitstream::zeros(store().block_bits());
    } else {
        blk = store().read_block(column_blocks_[b]);
    }
    blk.set_bits((orig % per) * column_width_, ch, column_width_);
    store().write_block(column_blocks_[b], blk);
}

void DynamicIndex::column_reset(std::span<const std::uint32_t> x) {
    for (auto a : column_blocks_) pool_.release(a);
    column_blocks_.clear();
    const std::uint64_t per = column_per_block();
    for (std::uint64_t b = 0; b * per < x.size(); ++b) {
        Bitstream blk;
        for (std::uint64_t j = b * per; j < std::min<std::uint64_t>(x.size(), (b + 1) * per); ++j)
            blk.push_bits(x[j], column_width_);
        blk.pad_to(store().block_bits());
        column_blocks_.push_back(pool_.allocate());
        store().write_block(column_blocks_.back(), blk);
    }
}

// ---------------------------------------------------------------- inspection

std::vector<DynamicNodeView> DynamicIndex::nodes() const {
    std::vector<DynamicNodeView> out(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const WNode& n = nodes_[i];
        if (!n.alive) {
            out[i].parent = -2;
            continue;
        }
        out[i] = DynamicNodeView{n.level, height_ - n.level, n.weight, n.leaf, n.parent, n.sep, n.hi};
    }
    return out;
}

std::uint64_t DynamicIndex::memory_bits() const noexcept {
    std::uint64_t bits = root_wbuffer_.size() * wrecord_bits();
    for (const auto& n : nodes_)
        if (n.alive) bits += 4 * 64 + 32 * n.kids.size();
    for (const auto& st : stores_) bits += st.memory_bits();
    bits += 64 * (last_pos_.size() + std::size_t{sigma_} * stores_.size() * (variant_ == DynamicVariant::kDirectAppend));
    return bits;
}

std::uint64_t DynamicIndex::space_bits() const noexcept { return pool_.live_blocks() * store().block_bits(); }

std::vector<std::uint64_t> DynamicIndex::peek_keys() const {
    std::vector<std::uint64_t> keys;
    for (unsigned s = 0; s < stores_.size(); ++s) {
        std::vector<int> fr;
        collect_frontier(root_, s, fr);
        std::unordered_map<std::uint64_t, int> by_id;
        for (int f : fr) by_id[node(f).sep] = f;
        for (const auto& seg : stores_[s].logical()) {
            const auto it = by_id.find(seg.id);
            require(it != by_id.end(), ErrorCode::kPrecondition, "stored bitmap without a node");
            if (!node(it->second).leaf) continue;
            for (auto p : seg.positions) keys.push_back(make_key(node(it->second).ch, p));
        }
    }
    if (variant_ == DynamicVariant::kBufferedAppend)
        for (std::size_t v = 0; v < nodes_.size(); ++v)
            if (nodes_[v].alive && !nodes_[v].leaf)
                for (auto k : peek_wbuffer(static_cast<int>(v))) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

std::vector<std::uint32_t> DynamicIndex::peek_string() const {
    std::vector<std::uint32_t> out(size(), sigma_);
    std::vector<std::uint64_t> deleted;
    if (deletions_) deleted = deletions_->keys();
    for (auto k : peek_keys()) {
        std::uint64_t p = key_pos(k);
        if (deletions_) p -= static_cast<std::uint64_t>(std::lower_bound(deleted.begin(), deleted.end(), p) - deleted.begin());
        require(p < out.size(), ErrorCode::kPrecondition, "occurrence beyond the string");
        out[p] = key_char(k);
    }
    return out;
}

void DynamicIndex::check_invariants() const {
    auto ensure = [](bool ok, const char* what) { require(ok, ErrorCode::kPrecondition, what); };
    const auto keys = peek_keys();
    ensure(node(root_).parent == -1 && node(root_).sep == 0 && node(root_).hi == kEnd && node(root_).level == height_,
           "bad root");
    ensure(node(root_).weight == keys.size() && keys.size() == size(), "root weight differs from the occurrences");

    // Skeleton.
    std::vector<int> stack{root_};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        const WNode& n = node(v);
        ensure(n.alive, "dead node reachable");
        const auto b = std::lower_bound(keys.begin(), keys.end(), n.sep);
        const auto e = std::lower_bound(b, keys.end(), n.hi);
        ensure(static_cast<std::uint64_t>(e - b) == n.weight, "node weight differs from its key range");
        if (v != root_) ensure(in_bounds(v), "node weight out of bounds");
        if (n.leaf) {
            ensure(n.kids.empty(), "leaf with children");
            for (auto it = b; it != e; ++it) ensure(key_char(*it) == n.ch, "leaf holds two characters");
            continue;
        }
        ensure(!n.kids.empty() && n.level >= 1, "bad internal node");
        std::uint64_t w = 0;
        for (std::size_t i = 0; i < n.kids.size(); ++i) {
            const WNode& k = node(n.kids[i]);
            ensure(k.parent == v && k.level + 1 == n.level, "child link or level broken");
            ensure(k.sep == (i == 0 ? n.sep : k.sep) && k.hi == (i + 1 < n.kids.size() ? node(n.kids[i + 1]).sep : n.hi),
                   "child ranges do not partition the node");
            ensure(k.sep < k.hi, "empty key range");
            w += k.weight;
            stack.push_back(n.kids[i]);
        }
        ensure(w == n.weight, "weights do not add up");
        if (variant_ == DynamicVariant::kBufferedAppend && v != root_)
            ensure(n.buf_count <= wcapacity(), "node buffer over capacity");
    }
    if (variant_ == DynamicVariant::kBufferedAppend) ensure(root_wbuffer_.size() <= wcapacity() || node(root_).leaf, "root buffer over capacity");

    // Stores.
    for (unsigned s = 0; s < stores_.size(); ++s) {
        stores_[s].check();
        std::vector<int> fr;
        collect_frontier(root_, s, fr);
        std::map<std::uint64_t, std::vector<std::uint64_t>> have;
        for (auto& seg : stores_[s].logical()) have[seg.id] = std::move(seg.positions);
        std::set<std::uint64_t> ids;
        for (int f : fr) {
            ids.insert(node(f).sep);
            const auto b = std::lower_bound(keys.begin(), keys.end(), node(f).sep);
            const auto e = std::lower_bound(b, keys.end(), node(f).hi);
            std::vector<std::uint64_t> want;
            for (auto it = b; it != e; ++it) want.push_back(key_pos(*it));
            std::sort(want.begin(), want.end());
            std::vector<std::uint64_t> got = have.count(node(f).sep) ? have[node(f).sep] : std::vector<std::uint64_t>{};
            if (variant_ == DynamicVariant::kBufferedAppend) {
                ensure(std::includes(want.begin(), want.end(), got.begin(), got.end()), "stored bitmap has extra positions");
                for (int a = node(f).parent; a >= 0; a = node(a).parent)
                    for (auto k : peek_wbuffer(a))
                        if (k >= node(f).sep && k < node(f).hi) got.push_back(key_pos(k));
                std::sort(got.begin(), got.end());
                got.erase(std::unique(got.begin(), got.end()), got.end());
            }
            ensure(got == want, "stored bitmap differs from the node's occurrences");
            if (variant_ == DynamicVariant::kBufferedAppend && !node(f).leaf) {
                // Updates below an explicit node have already been applied to it.
                const auto& stored = have[node(f).sep];
                std::vector<int> below(node(f).kids.begin(), node(f).kids.end());
                while (!below.empty()) {
                    const int w = below.back();
                    below.pop_back();
                    if (node(w).leaf) continue;
                    for (auto k : peek_wbuffer(w))
                        ensure(std::binary_search(stored.begin(), stored.end(), key_pos(k)),
                               "buffered update below a node missing from its bitmap");
                    below.insert(below.end(), node(w).kids.begin(), node(w).kids.end());
                }
            }
        }
        for (const auto& [id, pos] : have) ensure(ids.count(id) == 1, "stored bitmap of no frontier node");
    }

    if (variant_ == DynamicVariant::kDirectAppend) {
        ensure(directory_.consistent(), "directory back pointers inconsistent");
        for (std::uint32_t c = 0; c < sigma_; ++c) {
            if (last_pos_[c] == kNoPos) {
                for (unsigned s = 0; s < stores_.size(); ++s) ensure(!directory_.get(c, s), "directory entry for an absent character");
                continue;
            }
            const auto path = path_to(make_key(c, last_pos_[c]));
            for (unsigned s = 0; s < stores_.size(); ++s) {
                const int f = frontier_in(path, s);
                const auto got = directory_.get(c, s);
                if (f < 0) {
                    ensure(!got, "directory entry without a frontier node");
                } else {
                    ensure(got && *got == stores_[s].leaf_for(BbiKey{node(f).sep, kNoPos}), "stale directory entry");
                }
            }
        }
    }
    if (deletions_) {
        deletions_->check();
        std::vector<std::uint32_t> char_at(total_, sentinel());
        for (auto k : keys) char_at[key_pos(k)] = key_char(k);
        for (auto d : deletions_->keys()) ensure(d < total_ && char_at[d] == sentinel(), "deleted position still indexed");
        for (std::uint64_t p = 0; p < total_; ++p) ensure(column_peek(p) == char_at[p], "column and index disagree");
    }
}

}  // namespace rix
