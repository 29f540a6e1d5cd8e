#include "rangeindex/bitcodec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <queue>

#include "rangeindex/errors.hpp"

namespace rix {

namespace {

constexpr std::uint64_t low_mask(unsigned width) {
    return width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Bitstream

Bitstream Bitstream::zeros(std::size_t nbits) {
    Bitstream s;
    s.words_.assign((nbits + 63) / 64, 0);
    s.nbits_ = nbits;
    return s;
}

Bitstream Bitstream::from_string(std::string_view bits) {
    Bitstream s;
    for (char c : bits) {
        require(c == '0' || c == '1', ErrorCode::kInvalidArgument, "bit string must contain only 0/1");
        s.push_bit(c == '1');
    }
    return s;
}

void Bitstream::push_bits(std::uint64_t value, unsigned width) {
    if (width == 0) return;
    value &= low_mask(width);
    const unsigned used = static_cast<unsigned>(nbits_ % 64);
    if (used == 0) {
        words_.push_back(width == 64 ? value : value << (64 - width));
    } else {
        const unsigned room = 64 - used;
        if (width <= room) {
            words_.back() |= value << (room - width);
        } else {
            words_.back() |= value >> (width - room);
            words_.push_back(value << (64 - (width - room)));
        }
    }
    nbits_ += width;
}

void Bitstream::append(const Bitstream& other, std::size_t offset, std::size_t len) {
    require(offset + len <= other.nbits_, ErrorCode::kAddress, "append range past end of stream");
    const std::size_t start = nbits_;
    pad_to(nbits_ + len);
    copy_bits(other, offset, *this, start, len);
}

void Bitstream::pad_to(std::size_t nbits) {
    if (nbits <= nbits_) return;
    words_.resize((nbits + 63) / 64, 0);
    nbits_ = nbits;
}

void Bitstream::clear() noexcept {
    words_.clear();
    nbits_ = 0;
}

void Bitstream::set_bits(std::size_t offset, std::uint64_t value, unsigned width) {
    require(offset + width <= nbits_, ErrorCode::kAddress, "write past end of stream");
    value &= low_mask(width);
    for (unsigned done = 0; done < width;) {
        const std::size_t pos = offset + done;
        const std::size_t w = pos / 64;
        const unsigned used = static_cast<unsigned>(pos % 64);
        const unsigned take = std::min(64 - used, width - done);
        const std::uint64_t chunk = (value >> (width - done - take)) & low_mask(take);
        const unsigned shift = 64 - used - take;
        words_[w] = (words_[w] & ~(low_mask(take) << shift)) | (chunk << shift);
        done += take;
    }
}

std::string Bitstream::to_string() const {
    std::string out;
    out.reserve(nbits_);
    for (std::size_t i = 0; i < nbits_; ++i) out.push_back(bit(i) ? '1' : '0');
    return out;
}

bool operator==(const Bitstream& a, const Bitstream& b) {
    if (a.nbits_ != b.nbits_) return false;
    const std::size_t full = a.nbits_ / 64;
    if (!std::equal(a.words_.begin(), a.words_.begin() + full, b.words_.begin())) return false;
    const unsigned tail = a.nbits_ % 64;
    if (tail == 0) return true;
    const std::uint64_t mask = ~low_mask(64 - tail);
    return (a.words_[full] & mask) == (b.words_[full] & mask);
}

void copy_bits(const Bitstream& src, std::size_t src_off, Bitstream& dst, std::size_t dst_off,
               std::size_t len) {
    require(src_off + len <= src.nbits_ && dst_off + len <= dst.nbits_, ErrorCode::kAddress,
            "copy range out of bounds");
    if ((src_off % 64) == 0 && (dst_off % 64) == 0) {
        const std::size_t whole = len / 64;
        std::memcpy(dst.words_.data() + dst_off / 64, src.words_.data() + src_off / 64,
                    whole * sizeof(std::uint64_t));
        src_off += whole * 64;
        dst_off += whole * 64;
        len -= whole * 64;
    }
    while (len > 0) {
        const unsigned take = static_cast<unsigned>(std::min<std::size_t>(64, len));
        dst.set_bits(dst_off, src.read_bits(src_off, take), take);
        src_off += take;
        dst_off += take;
        len -= take;
    }
}

// ---------------------------------------------------------------------------
// BitReader

std::uint64_t BitReader::read_gamma() {
    // Count the zero prefix a word at a time.
    unsigned zeros = 0;
    for (;;) {
        require(pos_ < s_->size(), ErrorCode::kCorruptStream, "stream ended mid-codeword");
        const unsigned window = static_cast<unsigned>(std::min<std::size_t>(64, s_->size() - pos_));
        const std::uint64_t w = s_->read_bits(pos_, window) << (64 - window);
        if (w == 0) {
            zeros += window;
            pos_ += window;
            require(zeros < 64, ErrorCode::kCorruptStream, "gamma prefix too long");
            continue;
        }
        const unsigned lead = static_cast<unsigned>(std::countl_zero(w));
        zeros += lead;
        pos_ += lead;
        break;
    }
    require(zeros < 64, ErrorCode::kCorruptStream, "gamma prefix too long");
    require(pos_ + zeros + 1 <= s_->size(), ErrorCode::kCorruptStream, "stream ended mid-codeword");
    const std::uint64_t v = s_->read_bits(pos_, zeros + 1);
    pos_ += zeros + 1;
    return v;
}

// ---------------------------------------------------------------------------
// gamma codes

unsigned floor_log2(std::uint64_t v) noexcept { return 63 - static_cast<unsigned>(std::countl_zero(v)); }

unsigned bit_width_for(std::uint64_t max_value) noexcept {
    return max_value == 0 ? 1 : static_cast<unsigned>(std::bit_width(max_value));
}

std::size_t gamma_length(std::uint64_t v) { return 2 * std::size_t{floor_log2(v)} + 1; }

void append_gamma(Bitstream& out, std::uint64_t v) {
    require(v >= 1, ErrorCode::kInvalidArgument, "gamma code requires v >= 1");
    const unsigned lg = floor_log2(v);
    if (lg + lg + 1 <= 64) {
        out.push_bits(v, lg + lg + 1);  // leading zeros come for free
    } else {
        out.push_bits(0, lg);
        out.push_bits(v, lg + 1);
    }
}

Bitstream gamma_encode(std::uint64_t v) {
    Bitstream s;
    append_gamma(s, v);
    return s;
}

std::pair<std::uint64_t, std::size_t> gamma_decode(const Bitstream& s, std::size_t offset) {
    BitReader r(s, offset);
    const std::uint64_t v = r.read_gamma();
    return {v, r.position()};
}

// ---------------------------------------------------------------------------
// CompressedBitmap

CompressedBitmap::CompressedBitmap(std::uint64_t universe, std::uint64_t cardinality, Bitstream payload)
    : universe_(universe), cardinality_(cardinality), payload_(std::move(payload)) {}

void BitmapBuilder::push(std::uint64_t position) {
    require(position < universe_, ErrorCode::kInvalidArgument, "position outside universe");
    if (count_ == 0) {
        append_gamma(payload_, position + 1);
    } else {
        require(position > last_, ErrorCode::kInvalidArgument, "positions must be strictly increasing");
        append_gamma(payload_, position - last_);
    }
    last_ = position;
    ++count_;
}

CompressedBitmap BitmapBuilder::finish() && {
    return CompressedBitmap(universe_, count_, std::move(payload_));
}

std::optional<std::uint64_t> GapCursor::next() {
    if (left_ == 0) return std::nullopt;
    --left_;
    const std::uint64_t code = reader_.read_gamma();
    if (!started_) {
        started_ = true;
        last_ = code - 1;
    } else {
        last_ += code;
    }
    return last_;
}

CompressedBitmap compress_positions(std::span<const std::uint64_t> positions, std::uint64_t universe) {
    require(universe >= 1, ErrorCode::kInvalidArgument, "universe must be positive");
    BitmapBuilder b(universe);
    for (std::uint64_t p : positions) b.push(p);
    return std::move(b).finish();
}

std::vector<std::uint64_t> decompress(const CompressedBitmap& bm) {
    std::vector<std::uint64_t> out;
    out.reserve(bm.cardinality());
    GapCursor cur(bm);
    while (auto p = cur.next()) {
        require(*p < bm.universe(), ErrorCode::kCorruptStream, "decoded position outside universe");
        out.push_back(*p);
    }
    return out;
}

namespace {

// Emits positions in increasing order, or the gaps between them.
class MergeSink {
public:
    MergeSink(std::uint64_t universe, bool complement) : out_(universe), n_(universe), complement_(complement) {}
    void take(std::uint64_t p) {
        require(p < n_, ErrorCode::kCorruptStream, "decoded position outside universe");
        if (!complement_) {
            out_.push(p);
            return;
        }
        for (; next_ < p; ++next_) out_.push(next_);
        next_ = p + 1;
    }
    CompressedBitmap finish() && {
        if (complement_)
            for (; next_ < n_; ++next_) out_.push(next_);
        return std::move(out_).finish();
    }

private:
    BitmapBuilder out_;
    std::uint64_t n_;
    bool complement_;
    std::uint64_t next_ = 0;
};

template <bool kAllowDuplicates>
CompressedBitmap kway_merge(std::span<GapCursor> cursors, std::uint64_t n, bool complement_output) {
    MergeSink sink(n, complement_output);
    bool have_last = false;
    std::uint64_t last = 0;
    auto emit = [&](std::uint64_t p) {
        if (have_last && p <= last) {
            require(p == last, ErrorCode::kCorruptStream, "cursor out of order");
            if constexpr (!kAllowDuplicates) fail(ErrorCode::kPrecondition, "merge_disjoint inputs overlap");
            return;
        }
        sink.take(p);
        last = p;
        have_last = true;
    };
    if (cursors.size() == 1) {
        while (auto p = cursors[0].next()) emit(*p);
        return std::move(sink).finish();
    }
    using Head = std::pair<std::uint64_t, std::size_t>;
    std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
    for (std::size_t i = 0; i < cursors.size(); ++i)
        if (auto p = cursors[i].next()) heap.emplace(*p, i);
    while (!heap.empty()) {
        const auto [p, i] = heap.top();
        heap.pop();
        emit(p);
        if (auto q = cursors[i].next()) heap.emplace(*q, i);
    }
    return std::move(sink).finish();
}

template <bool kAllowDuplicates>
CompressedBitmap kway_merge(std::span<const CompressedBitmap> bitmaps) {
    require(!bitmaps.empty(), ErrorCode::kInvalidArgument, "merge needs at least one bitmap");
    const std::uint64_t n = bitmaps.front().universe();
    std::vector<GapCursor> cursors;
    cursors.reserve(bitmaps.size());
    for (const auto& bm : bitmaps) {
        require(bm.universe() == n, ErrorCode::kInvalidArgument, "bitmaps have different universes");
        cursors.emplace_back(bm);
    }
    return kway_merge<kAllowDuplicates>(cursors, n, false);
}

}  // namespace

CompressedBitmap merge_cursors(std::span<GapCursor> cursors, std::uint64_t universe, bool complement_output) {
    require(universe >= 1, ErrorCode::kInvalidArgument, "universe must be positive");
    return kway_merge<false>(cursors, universe, complement_output);
}

CompressedBitmap merge_disjoint(std::span<const CompressedBitmap> bitmaps) {
    return kway_merge<false>(bitmaps);
}

CompressedBitmap merge_union(std::span<const CompressedBitmap> bitmaps) {
    return kway_merge<true>(bitmaps);
}

CompressedBitmap complement(const CompressedBitmap& bm) {
    BitmapBuilder out(bm.universe());
    GapCursor cur(bm);
    std::uint64_t next_free = 0;
    while (auto p = cur.next()) {
        require(*p < bm.universe() && *p >= next_free, ErrorCode::kCorruptStream, "corrupt bitmap");
        for (std::uint64_t q = next_free; q < *p; ++q) out.push(q);
        next_free = *p + 1;
    }
    for (std::uint64_t q = next_free; q < bm.universe(); ++q) out.push(q);
    return std::move(out).finish();
}

std::size_t size_bits(const CompressedBitmap& bm) noexcept { return bm.payload().size(); }

double payload_bound_bits(std::uint64_t universe, std::uint64_t cardinality) {
    const double z = static_cast<double>(cardinality);
    const double n = static_cast<double>(universe);
    if (cardinality == 0) return 0.0;
    return 2.0 * z * std::log2(n / z + 1.0) + 4.0 * z + 64.0;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[at + i]} << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const CompressedBitmap& bm) {
    std::vector<std::uint8_t> out;
    const std::size_t nbits = bm.payload().size();
    out.reserve(24 + (nbits + 7) / 8);
    put_u64(out, bm.universe());
    put_u64(out, bm.cardinality());
    put_u64(out, nbits);
    for (std::size_t off = 0; off < nbits; off += 8) {
        const unsigned take = static_cast<unsigned>(std::min<std::size_t>(8, nbits - off));
        out.push_back(static_cast<std::uint8_t>(bm.payload().read_bits(off, take) << (8 - take)));
    }
    return out;
}

CompressedBitmap deserialize(std::span<const std::uint8_t> bytes) {
    require(bytes.size() >= 24, ErrorCode::kCorruptStream, "bitmap header truncated");
    const std::uint64_t n = get_u64(bytes, 0);
    const std::uint64_t z = get_u64(bytes, 8);
    const std::uint64_t nbits = get_u64(bytes, 16);
    require(bytes.size() == 24 + (nbits + 7) / 8, ErrorCode::kCorruptStream, "bitmap payload length mismatch");
    Bitstream payload;
    payload.reserve(nbits);
    for (std::size_t off = 0; off < nbits; off += 8) {
        const unsigned take = static_cast<unsigned>(std::min<std::uint64_t>(8, nbits - off));
        payload.push_bits(bytes[24 + off / 8] >> (8 - take), take);
    }
    CompressedBitmap bm(n, z, std::move(payload));
    // Validate by decoding; a corrupt payload throws here.
    GapCursor cur(bm);
    while (auto p = cur.next())
        require(*p < n, ErrorCode::kCorruptStream, "decoded position outside universe");
    require(cur.position() == nbits, ErrorCode::kCorruptStream, "trailing bits after last code");
    return bm;
}

}  // namespace rix
