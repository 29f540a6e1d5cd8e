#pragma once

// Bit-level streams, Elias gamma codes and gap-coded position sets.
//
// Bits are numbered from 0 and packed most-significant-bit first into 64-bit
// words, so bit i lives in words_[i / 64] at shift 63 - i % 64. The same order
// is used for the serialized byte form.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rangeindex/errors.hpp"

namespace rix {

class Bitstream {
public:
    Bitstream() = default;

    static Bitstream zeros(std::size_t nbits);
    // Parses a string of '0'/'1' characters. Other characters are rejected.
    static Bitstream from_string(std::string_view bits);

    std::size_t size() const noexcept { return nbits_; }
    bool empty() const noexcept { return nbits_ == 0; }

    void push_bit(bool bit);
    // Appends the low `width` bits of `value`, most significant first.
    void push_bits(std::uint64_t value, unsigned width);
    // Appends bits [offset, offset + len) of `other`.
    void append(const Bitstream& other, std::size_t offset, std::size_t len);
    void append(const Bitstream& other) { append(other, 0, other.size()); }
    void pad_to(std::size_t nbits);
    void clear() noexcept;
    void reserve(std::size_t nbits) { words_.reserve((nbits + 63) / 64); }

    bool bit(std::size_t i) const;
    // Reads `width` (<= 64) bits starting at `offset`.
    std::uint64_t read_bits(std::size_t offset, unsigned width) const;
    // read_bits without the bounds check; the caller guarantees
    // 1 <= width <= 64 and offset + width <= size().
    std::uint64_t get_bits(std::size_t offset, unsigned width) const noexcept;
    void set_bits(std::size_t offset, std::uint64_t value, unsigned width);

    std::span<const std::uint64_t> words() const noexcept { return words_; }
    std::string to_string() const;

    friend bool operator==(const Bitstream& a, const Bitstream& b);

private:
    friend void copy_bits(const Bitstream&, std::size_t, Bitstream&, std::size_t, std::size_t);
    std::vector<std::uint64_t> words_;
    std::size_t nbits_ = 0;
};

// Overwrites dst[dst_off, dst_off + len) with src[src_off, src_off + len).
// dst must already be at least dst_off + len bits long.
void copy_bits(const Bitstream& src, std::size_t src_off, Bitstream& dst, std::size_t dst_off,
               std::size_t len);

// Sequential reader over a Bitstream.
class BitReader {
public:
    explicit BitReader(const Bitstream& s, std::size_t offset = 0) : s_(&s), pos_(offset) {}

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return s_->size() - pos_; }
    bool at_end() const noexcept { return pos_ >= s_->size(); }

    bool read_bit();
    std::uint64_t read_bits(unsigned width);
    // Throws kCorruptStream on a truncated code.
    std::uint64_t read_gamma();

private:
    const Bitstream* s_;
    std::size_t pos_;
};

// Number of bits needed to write values in [0, max_value].
unsigned bit_width_for(std::uint64_t max_value) noexcept;
// floor(lg v) for v >= 1.
unsigned floor_log2(std::uint64_t v) noexcept;

// Standard Elias gamma: floor(lg v) zeros followed by v in binary.
Bitstream gamma_encode(std::uint64_t v);
void append_gamma(Bitstream& out, std::uint64_t v);
std::size_t gamma_length(std::uint64_t v);
std::pair<std::uint64_t, std::size_t> gamma_decode(const Bitstream& s, std::size_t offset);

// Sorted position set over [0, universe) stored as gamma-coded gaps. The first
// gap is the absolute first position; later gaps are (difference - 1). Every
// gap x is written as gamma(x + 1).
class CompressedBitmap {
public:
    CompressedBitmap() = default;
    explicit CompressedBitmap(std::uint64_t universe) : universe_(universe) {}
    CompressedBitmap(std::uint64_t universe, std::uint64_t cardinality, Bitstream payload);

    std::uint64_t universe() const noexcept { return universe_; }
    std::uint64_t cardinality() const noexcept { return cardinality_; }
    const Bitstream& payload() const noexcept { return payload_; }

    friend bool operator==(const CompressedBitmap&, const CompressedBitmap&) = default;

private:
    std::uint64_t universe_ = 0;
    std::uint64_t cardinality_ = 0;
    Bitstream payload_;
};

// Incremental encoder: positions must be pushed in strictly increasing order.
class BitmapBuilder {
public:
    explicit BitmapBuilder(std::uint64_t universe) : universe_(universe) {}

    void push(std::uint64_t position);
    std::uint64_t cardinality() const noexcept { return count_; }
    CompressedBitmap finish() &&;

private:
    std::uint64_t universe_;
    std::uint64_t count_ = 0;
    std::uint64_t last_ = 0;
    Bitstream payload_;
};

// Streaming decoder over `count` gap codes starting at `offset` of `bits`.
class GapCursor {
public:
    GapCursor(const Bitstream& bits, std::size_t offset, std::uint64_t count)
        : reader_(bits, offset), left_(count) {}
    explicit GapCursor(const CompressedBitmap& bm) : GapCursor(bm.payload(), 0, bm.cardinality()) {}

    std::optional<std::uint64_t> next();
    std::size_t position() const noexcept { return reader_.position(); }

private:
    BitReader reader_;
    std::uint64_t left_;
    std::uint64_t last_ = 0;
    bool started_ = false;
};

CompressedBitmap compress_positions(std::span<const std::uint64_t> positions, std::uint64_t universe);
std::vector<std::uint64_t> decompress(const CompressedBitmap& bm);
// One streaming pass over all inputs. Throws kPrecondition on overlap.
CompressedBitmap merge_disjoint(std::span<const CompressedBitmap> bitmaps);
// As merge_disjoint but duplicates collapse. Used for hashed sets.
CompressedBitmap merge_union(std::span<const CompressedBitmap> bitmaps);
CompressedBitmap complement(const CompressedBitmap& bm);
// Disjoint k-way merge straight from cursors over [0, universe). With
// `complement_output` the positions not produced by any cursor are emitted.
CompressedBitmap merge_cursors(std::span<GapCursor> cursors, std::uint64_t universe, bool complement_output = false);
std::size_t size_bits(const CompressedBitmap& bm) noexcept;

inline void Bitstream::push_bit(bool bit) {
    if (nbits_ % 64 == 0) words_.push_back(0);
    if (bit) words_.back() |= std::uint64_t{1} << (63 - nbits_ % 64);
    ++nbits_;
}

inline bool Bitstream::bit(std::size_t i) const {
    require(i < nbits_, ErrorCode::kAddress, "bit index out of range");
    return (words_[i / 64] >> (63 - i % 64)) & 1;
}

inline std::uint64_t Bitstream::read_bits(std::size_t offset, unsigned width) const {
    if (width == 0) return 0;
    require(offset + width <= nbits_, ErrorCode::kAddress, "read past end of stream");
    const std::size_t w = offset / 64;
    const unsigned sh = static_cast<unsigned>(offset % 64);
    std::uint64_t hi = words_[w] << sh;
    if (sh != 0 && w + 1 < words_.size()) hi |= words_[w + 1] >> (64 - sh);
    return hi >> (64 - width);
}

inline std::uint64_t Bitstream::get_bits(std::size_t offset, unsigned width) const noexcept {
    const std::size_t w = offset / 64;
    const unsigned sh = static_cast<unsigned>(offset % 64);
    std::uint64_t hi = words_[w] << sh;
    if (sh != 0 && w + 1 < words_.size()) hi |= words_[w + 1] >> (64 - sh);
    return hi >> (64 - width);
}

inline bool BitReader::read_bit() {
    require(pos_ < s_->size(), ErrorCode::kCorruptStream, "stream ended mid-codeword");
    return s_->bit(pos_++);
}

inline std::uint64_t BitReader::read_bits(unsigned width) {
    require(pos_ + width <= s_->size(), ErrorCode::kCorruptStream, "stream ended mid-codeword");
    const std::uint64_t v = s_->read_bits(pos_, width);
    pos_ += width;
    return v;
}

// Length bound on the payload for z >= 1: 2 z lg(n/z + 1) + 4 z + 64.
double payload_bound_bits(std::uint64_t universe, std::uint64_t cardinality);

// Serialized form: little-endian u64 universe, u64 cardinality, u64 payload
// bit length, then the payload padded with zeros to a byte boundary.
std::vector<std::uint8_t> serialize(const CompressedBitmap& bm);
CompressedBitmap deserialize(std::span<const std::uint8_t> bytes);

}  // namespace rix
