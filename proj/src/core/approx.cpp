#include "rangeindex/approx.hpp"

#include <algorithm>
#include <random>

#include "rangeindex/errors.hpp"

namespace rix {

namespace {

using u128 = unsigned __int128;

void encode_sorted(Bitstream& out, const std::vector<std::uint64_t>& values) {
    append_gamma(out, values.size() + 1);
    std::uint64_t last = 0;
    for (std::size_t t = 0; t < values.size(); ++t) {
        append_gamma(out, t == 0 ? values[t] + 1 : values[t] - last);
        last = values[t];
    }
}

void sort_unique(std::vector<std::uint64_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

unsigned hash_level_count(std::uint64_t n) noexcept {
    unsigned k = 0;
    while (HashFamily::width(k + 1) < 64 && HashFamily::universe(k + 1) <= n) ++k;
    return k;
}

std::uint64_t HashFamily::universe(unsigned j) noexcept {
    const unsigned w = width(j);
    return w >= 64 ? ~std::uint64_t{0} : std::uint64_t{1} << w;
}

HashFamily HashFamily::create(std::uint64_t n, std::uint64_t seed) {
    require(n >= 1, ErrorCode::kInvalidArgument, "universe must be positive");
    HashFamily f;
    f.n_ = n;
    f.seed_ = seed;
    std::mt19937_64 rng(seed);
    f.levels_.resize(hash_level_count(n));
    for (auto& p : f.levels_) {
        p.a_hi = rng();
        p.a_lo = rng();
        p.b_hi = rng();
        p.b_lo = rng();
    }
    return f;
}

std::uint64_t HashFamily::g(unsigned j, std::uint64_t i1) const {
    require(j >= 1 && j <= k(), ErrorCode::kInvalidArgument, "hash level out of range");
    const Params& p = levels_[j - 1];
    const u128 a = (u128{p.a_hi} << 64) | p.a_lo;
    const u128 b = (u128{p.b_hi} << 64) | p.b_lo;
    const u128 v = a * i1 + b;
    return static_cast<std::uint64_t>(v >> (128 - width(j)));
}

std::uint64_t HashFamily::h(unsigned j, std::uint64_t i) const {
    const unsigned w = width(j);
    if (w >= 64) return g(j, 0) ^ i;
    return g(j, i >> w) ^ (i & ((std::uint64_t{1} << w) - 1));
}

void HashFamily::describe(Manifest& m, const std::string& prefix) const {
    m.set_u64(prefix + "n", n_);
    m.set_u64(prefix + "seed", seed_);
    m.set_u64(prefix + "k", k());
    std::vector<std::uint64_t> params;
    for (const auto& p : levels_) params.insert(params.end(), {p.a_hi, p.a_lo, p.b_hi, p.b_lo});
    m.set_list(prefix + "params", params);
}

HashFamily HashFamily::open(const Manifest& m, const std::string& prefix) {
    HashFamily f;
    f.n_ = m.get_u64(prefix + "n");
    f.seed_ = m.get_u64(prefix + "seed");
    const auto k = m.get_u64(prefix + "k");
    const auto params = m.get_list(prefix + "params");
    require(k == hash_level_count(f.n_) && params.size() == 4 * k, ErrorCode::kCorruptStream,
            "hash family parameters do not match");
    for (std::size_t j = 0; j < k; ++j)
        f.levels_.push_back({params[4 * j], params[4 * j + 1], params[4 * j + 2], params[4 * j + 3]});
    return f;
}

std::optional<unsigned> select_level(std::uint64_t z, double eps, unsigned k) {
    require(eps > 0.0 && eps <= 1.0, ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1]");
    if (z == 0) return std::nullopt;
    const long double need = static_cast<long double>(z) / static_cast<long double>(eps);
    for (unsigned j = 1; j <= k; ++j)
        if (static_cast<long double>(HashFamily::universe(j)) > need) return j;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// results

ApproxResult::ApproxResult(CompressedBitmap exact)
    : n_(exact.universe()), set_(std::move(exact)), decoded_(decompress(set_)) {}

ApproxResult::ApproxResult(CompressedBitmap hashed, unsigned j, const HashFamily& family)
    : n_(family.n()), level_(j), set_(std::move(hashed)), family_(family) {
    require(j >= 1 && j <= family.k(), ErrorCode::kInvalidArgument, "hash level out of range");
    require(set_.universe() == HashFamily::universe(j), ErrorCode::kInvalidArgument,
            "hashed set has the wrong universe");
    decoded_ = decompress(set_);
}

bool ApproxResult::contains(std::uint64_t i) const {
    require(i < n_, ErrorCode::kInvalidArgument, "position outside universe");
    const std::uint64_t key = level_ ? family_.h(*level_, i) : i;
    return std::binary_search(decoded_.begin(), decoded_.end(), key);
}

PreimageCursor ApproxResult::members() const { return PreimageCursor(*this); }

PreimageCursor::PreimageCursor(const ApproxResult& r) : r_(&r) {
    if (r.decoded_.empty()) return;
    if (!r.level_) {
        blocks_ = 1;
        buf_ = r.decoded_;
        block_ = 1;
        return;
    }
    const unsigned w = HashFamily::width(*r.level_);
    blocks_ = w >= 64 ? 1 : ((r.n_ - 1) >> w) + 1;
}

// Preimage of the hashed set within one value of i1: i2 = s xor g(i1).
void PreimageCursor::fill_block() {
    const unsigned j = *r_->level_;
    const unsigned w = HashFamily::width(j);
    const std::uint64_t g = r_->family_.g(j, block_);
    const std::uint64_t high = w >= 64 ? 0 : block_ << w;
    buf_.clear();
    for (std::uint64_t s : r_->decoded_) {
        const std::uint64_t i = high | (s ^ g);
        if (i < r_->n_) buf_.push_back(i);
    }
    std::sort(buf_.begin(), buf_.end());
    at_ = 0;
    ++block_;
}

std::optional<std::uint64_t> PreimageCursor::next() {
    while (at_ == buf_.size()) {
        if (block_ >= blocks_) return std::nullopt;
        fill_block();
    }
    return buf_[at_++];
}

IntersectCursor::IntersectCursor(std::span<const ApproxResult> results) {
    require(!results.empty(), ErrorCode::kInvalidArgument, "nothing to intersect");
    const std::uint64_t n = results.front().n();
    std::size_t best = 0;
    long double best_size = 0;
    for (std::size_t t = 0; t < results.size(); ++t) {
        const ApproxResult& r = results[t];
        require(r.n() == n, ErrorCode::kInvalidArgument, "results cover different universes");
        // Expected number of candidates the result would enumerate.
        long double size = static_cast<long double>(r.set().cardinality());
        if (!r.exact()) {
            const unsigned w = HashFamily::width(*r.level());
            if (w < 64) size *= static_cast<long double>(((n - 1) >> w) + 1);
        }
        if (t == 0 || size < best_size) {
            best = t;
            best_size = size;
        }
    }
    for (std::size_t t = 0; t < results.size(); ++t)
        if (t != best) others_.push_back(&results[t]);
    driver_.emplace(results[best]);
}

std::optional<std::uint64_t> IntersectCursor::next() {
    while (auto p = driver_->next()) {
        bool all = true;
        for (const ApproxResult* r : others_)
            if (!r->contains(*p)) {
                all = false;
                break;
            }
        if (all) return p;
    }
    return std::nullopt;
}

IntersectCursor intersect_approx(std::span<const ApproxResult> results) { return IntersectCursor(results); }

std::vector<std::uint64_t> collect(PreimageCursor cursor) {
    std::vector<std::uint64_t> out;
    while (auto p = cursor.next()) out.push_back(*p);
    return out;
}

std::vector<std::uint64_t> collect(IntersectCursor cursor) {
    std::vector<std::uint64_t> out;
    while (auto p = cursor.next()) out.push_back(*p);
    return out;
}

// ---------------------------------------------------------------------------
// index

ApproxIndex ApproxIndex::build(WbbIndex& idx, const HashFamily& family) {
    require(family.n() == idx.size(), ErrorCode::kInvalidArgument, "hash family built for another length");
    ApproxIndex ax(idx);
    ax.family_ = family;
    BlockStore& store = idx.store();
    std::vector<std::uint64_t> positions, hashed;
    for (unsigned s = 0; s < idx.stores().size(); ++s) {
        const WbbStoreInfo& info = idx.stores()[s];
        // Every entry of the exact store, read once.
        std::vector<std::vector<std::uint64_t>> entries(info.entries);
        BlockScanner scan(store, info.base);
        for (auto& e : entries) WbbIndex::decode_entries(scan, 1, e);
        for (unsigned j = 1; j <= family.k(); ++j) {
            Bitstream region;
            std::vector<std::uint64_t> offsets;
            offsets.reserve(entries.size() + 1);
            for (const auto& e : entries) {
                hashed.clear();
                for (std::uint64_t p : e) hashed.push_back(family.h(j, p));
                sort_unique(hashed);
                offsets.push_back(region.size());
                encode_sorted(region, hashed);
            }
            offsets.push_back(region.size());
            HashedStoreInfo h;
            h.store = s;
            h.j = j;
            h.bits = region.size();
            h.base = store.append_region(region);
            h.dir_width = bit_width_for(region.size());
            Bitstream dir;
            for (std::uint64_t off : offsets) dir.push_bits(off, h.dir_width);
            h.dir_base = store.append_region(dir);
            ax.hashed_.push_back(h);
        }
    }
    return ax;
}

const HashedStoreInfo& ApproxIndex::hashed(unsigned store, unsigned j) const {
    require(store < idx_->stores().size() && j >= 1 && j <= family_.k(), ErrorCode::kInvalidArgument,
            "no such hashed store");
    return hashed_[store * family_.k() + (j - 1)];
}

ApproxResult ApproxIndex::query(std::uint32_t lo, std::uint32_t hi, double eps, ApproxTrace* trace) {
    require(eps > 0.0 && eps <= 1.0, ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1]");
    BlockStore& store = idx_->store();
    const std::uint64_t before = store.snapshot().reads;
    const auto [l, r] = idx_->to_internal(lo, hi);
    NavCache cache(store);
    const auto selected = idx_->decompose_internal(l, r, cache);
    std::uint64_t z = 0;
    for (const auto& s : selected) z += s.entry.weight;
    const auto level = select_level(z, eps, family_.k());
    if (trace) {
        trace->z = z;
        trace->level = level;
    }
    if (!level) {
        WbbQueryTrace t;
        ApproxResult exact(idx_->range_query(lo, hi, &t));
        if (trace) {
            trace->set_bits_read += t.data_bits_read;
            trace->chunks += t.chunks.size();
            trace->reads += store.snapshot().reads - before;
        }
        return exact;
    }
    const unsigned j = *level;
    const auto chunks = idx_->plan_chunks(selected);
    store.note_working_set(std::max<std::uint64_t>(chunks.size(), 1) * store.block_bits());
    std::vector<std::uint64_t> values;
    for (const auto& c : chunks) {
        const HashedStoreInfo& h = hashed(c.store, j);
        BlockScanner dir(store, h.dir_base + c.entry_first * h.dir_width);
        const std::uint64_t off = dir.read_bits(h.dir_width);
        require(off <= h.bits, ErrorCode::kCorruptStream, "hashed directory entry out of range");
        BlockScanner data(store, h.base + off);
        WbbIndex::decode_entries(data, c.entry_count, values);
        if (trace) trace->set_bits_read += data.position() - (h.base + off);
    }
    sort_unique(values);
    CompressedBitmap set = compress_positions(values, HashFamily::universe(j));
    store.note_working_set(size_bits(set));
    if (trace) {
        trace->chunks += chunks.size();
        trace->reads += store.snapshot().reads - before;
    }
    return ApproxResult(std::move(set), j, family_);
}

std::vector<std::vector<std::uint64_t>> ApproxIndex::peek_hashed_entries(unsigned store, unsigned j) const {
    const HashedStoreInfo& h = hashed(store, j);
    const Bitstream bits = idx_->store().peek(h.base, h.bits);
    std::vector<std::vector<std::uint64_t>> out(idx_->stores()[store].entries);
    BitReader r(bits);
    for (auto& entry : out) {
        const std::uint64_t card = r.read_gamma() - 1;
        std::uint64_t v = 0;
        for (std::uint64_t t = 0; t < card; ++t) {
            v = t == 0 ? r.read_gamma() - 1 : v + r.read_gamma();
            entry.push_back(v);
        }
    }
    return out;
}

std::vector<std::uint64_t> ApproxIndex::hashed_entry_bits(unsigned store, unsigned j) const {
    const HashedStoreInfo& h = hashed(store, j);
    const std::uint64_t entries = idx_->stores()[store].entries;
    const Bitstream dir = idx_->store().peek(h.dir_base, (entries + 1) * h.dir_width);
    std::vector<std::uint64_t> out(entries);
    for (std::uint64_t e = 0; e < entries; ++e)
        out[e] = dir.read_bits((e + 1) * h.dir_width, h.dir_width) - dir.read_bits(e * h.dir_width, h.dir_width);
    return out;
}

std::uint64_t ApproxIndex::total_hashed_bits() const noexcept {
    std::uint64_t total = 0;
    for (const auto& h : hashed_) total += h.bits;
    return total;
}

void ApproxIndex::describe(Manifest& m) const {
    family_.describe(m, "approx.family.");
    std::vector<std::uint64_t> bases, bits, dir_bases, dir_widths;
    for (const auto& h : hashed_) {
        bases.push_back(h.base);
        bits.push_back(h.bits);
        dir_bases.push_back(h.dir_base);
        dir_widths.push_back(h.dir_width);
    }
    m.set_list("approx.bases", bases);
    m.set_list("approx.bits", bits);
    m.set_list("approx.dir_bases", dir_bases);
    m.set_list("approx.dir_widths", dir_widths);
}

ApproxIndex ApproxIndex::open(WbbIndex& idx, const Manifest& m) {
    ApproxIndex ax(idx);
    ax.family_ = HashFamily::open(m, "approx.family.");
    require(ax.family_.n() == idx.size(), ErrorCode::kCorruptStream, "hash family built for another length");
    const auto bases = m.get_list("approx.bases");
    const auto bits = m.get_list("approx.bits");
    const auto dir_bases = m.get_list("approx.dir_bases");
    const auto dir_widths = m.get_list("approx.dir_widths");
    const std::size_t expect = idx.stores().size() * ax.family_.k();
    require(bases.size() == expect && bits.size() == expect && dir_bases.size() == expect &&
                dir_widths.size() == expect,
            ErrorCode::kCorruptStream, "hashed store lists disagree");
    for (std::size_t t = 0; t < expect; ++t) {
        HashedStoreInfo h;
        h.store = static_cast<unsigned>(t / std::max(1u, ax.family_.k()));
        h.j = static_cast<unsigned>(t % ax.family_.k()) + 1;
        h.base = bases[t];
        h.bits = bits[t];
        h.dir_base = dir_bases[t];
        h.dir_width = static_cast<unsigned>(dir_widths[t]);
        require(h.dir_width >= 1 && h.dir_width <= 64, ErrorCode::kCorruptStream, "bad directory width");
        ax.hashed_.push_back(h);
    }
    return ax;
}

}  // namespace rix
