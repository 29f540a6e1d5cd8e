#include "rangeindex/iomodel.hpp"

#include <algorithm>
#include <bit>

#include <algorithm>
#include <cstring>
#include <fstream>

#include "rangeindex/errors.hpp"

namespace rix {

namespace {

constexpr char kSnapshotMagic[8] = {'R', 'I', 'X', 'B', 'L', 'K', 'S', '\0'};
constexpr std::uint8_t kSnapshotVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>(v >> (8 * i));
    os.write(buf, 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    require(static_cast<bool>(is), ErrorCode::kIo, "snapshot truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf[i]} << (8 * i);
    return v;
}

}  // namespace

unsigned IOConfig::word_bits() const noexcept { return bit_width_for(n_max - 1); }

void IOConfig::validate() const {
    require(block_bits >= 1, ErrorCode::kInvalidArgument, "block size must be positive");
    require(n_max >= 2, ErrorCode::kInvalidArgument, "n_max must be at least 2");
    require(block_bits >= word_bits(), ErrorCode::kInvalidArgument, "block size B must be at least lg n_max");
    require(word_block() >= 2, ErrorCode::kInvalidArgument, "block must hold at least two words (b >= 2)");
    require(memory_bits >= block_bits, ErrorCode::kInvalidArgument, "memory M must be at least one block");
}

std::uint64_t blocks_spanned(std::uint64_t start_bit, std::uint64_t len_bits, std::uint64_t block_bits) {
    if (len_bits == 0) return 0;
    return (start_bit + len_bits - 1) / block_bits - start_bit / block_bits + 1;
}

BlockStore::BlockStore(IOConfig config) : config_(config) { config_.validate(); }

BlockAddr BlockStore::allocate(std::uint64_t count) {
    const BlockAddr first = blocks_;
    blocks_ += count;
    bits_.pad_to(blocks_ * config_.block_bits);
    return first;
}

void BlockStore::check_range(std::uint64_t start_bit, std::uint64_t len_bits) const {
    require(start_bit <= size_bits() && len_bits <= size_bits() - start_bit, ErrorCode::kAddress,
            "block range not allocated");
}

std::uint64_t BlockStore::span_blocks(std::uint64_t start_bit, std::uint64_t len_bits) const noexcept {
    return blocks_spanned(start_bit, len_bits, config_.block_bits);
}

Bitstream BlockStore::read_block(BlockAddr addr) {
    require(addr < blocks_, ErrorCode::kAddress, "read of unallocated block");
    ++stats_.reads;
    return peek(addr * config_.block_bits, config_.block_bits);
}

void BlockStore::write_block(BlockAddr addr, const Bitstream& data) {
    require(addr < blocks_, ErrorCode::kAddress, "write of unallocated block");
    require(data.size() == config_.block_bits, ErrorCode::kInvalidArgument, "block write must be exactly B bits");
    ++stats_.writes;
    copy_bits(data, 0, bits_, addr * config_.block_bits, config_.block_bits);
}

Bitstream BlockStore::stream_read(std::uint64_t start_bit, std::uint64_t len_bits) {
    check_range(start_bit, len_bits);
    stats_.reads += span_blocks(start_bit, len_bits);
    return peek(start_bit, len_bits);
}

void BlockStore::charge_stream_read(std::uint64_t start_bit, std::uint64_t len_bits) {
    check_range(start_bit, len_bits);
    stats_.reads += span_blocks(start_bit, len_bits);
}

void BlockStore::stream_write(std::uint64_t start_bit, const Bitstream& data) {
    check_range(start_bit, data.size());
    stats_.writes += span_blocks(start_bit, data.size());
    copy_bits(data, 0, bits_, start_bit, data.size());
}

std::uint64_t BlockStore::append_region(const Bitstream& data) {
    const std::uint64_t blocks = std::max<std::uint64_t>(1, (data.size() + config_.block_bits - 1) / config_.block_bits);
    const std::uint64_t start = allocate(blocks) * config_.block_bits;
    stream_write(start, data);
    return start;
}

Bitstream BlockStore::peek(std::uint64_t start_bit, std::uint64_t len_bits) const {
    check_range(start_bit, len_bits);
    Bitstream out = Bitstream::zeros(len_bits);
    copy_bits(bits_, start_bit, out, 0, len_bits);
    return out;
}

void BlockStore::note_working_set(std::uint64_t bits) {
    stats_.peak_working_set_bits = std::max(stats_.peak_working_set_bits, bits);
    require(bits <= config_.memory_bits, ErrorCode::kPrecondition, "working set exceeds internal memory M");
}

void BlockStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), ErrorCode::kIo, "cannot open snapshot for writing");
    os.write(kSnapshotMagic, sizeof kSnapshotMagic);
    os.put(static_cast<char>(kSnapshotVersion));
    write_u64(os, config_.block_bits);
    write_u64(os, config_.memory_bits);
    write_u64(os, config_.n_max);
    write_u64(os, blocks_);
    const auto words = bits_.words();
    for (std::uint64_t w : words) write_u64(os, w);
    require(static_cast<bool>(os), ErrorCode::kIo, "snapshot write failed");
}

BlockStore BlockStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::kIo, "cannot open snapshot");
    char magic[sizeof kSnapshotMagic];
    is.read(magic, sizeof magic);
    require(static_cast<bool>(is) && std::memcmp(magic, kSnapshotMagic, sizeof magic) == 0,
            ErrorCode::kCorruptStream, "not a block snapshot");
    require(is.get() == kSnapshotVersion, ErrorCode::kCorruptStream, "unsupported snapshot version");
    IOConfig cfg;
    cfg.block_bits = read_u64(is);
    cfg.memory_bits = read_u64(is);
    cfg.n_max = read_u64(is);
    BlockStore store(cfg);
    const std::uint64_t blocks = read_u64(is);
    store.allocate(blocks);
    const std::uint64_t nwords = (store.size_bits() + 63) / 64;
    Bitstream raw;
    raw.reserve(nwords * 64);
    for (std::uint64_t i = 0; i < nwords; ++i) raw.push_bits(read_u64(is), 64);
    copy_bits(raw, 0, store.bits_, 0, store.size_bits());
    return store;
}

void BlockStore::clear() noexcept {
    blocks_ = 0;
    bits_.clear();
    stats_ = {};
}

void BlockStore::charge_read(BlockAddr addr) {
    require(addr < blocks_, ErrorCode::kAddress, "read of unallocated block");
    ++stats_.reads;
}

BlockScanner::BlockScanner(BlockStore& store, std::uint64_t start_bit)
    : store_(&store), pos_(start_bit), charged_end_(start_bit / store.block_bits() * store.block_bits()) {}

void BlockScanner::ensure(std::uint64_t end_bit) {
    const std::uint64_t B = store_->block_bits();
    while (charged_end_ < end_bit) {
        require(charged_end_ < store_->size_bits(), ErrorCode::kCorruptStream, "scan ran past the end of the store");
        store_->charge_read(charged_end_ / B);
        charged_end_ += B;
        ++blocks_;
    }
}

bool BlockScanner::read_bit() {
    ensure(pos_ + 1);
    return store_->contents().bit(pos_++);
}

std::uint64_t BlockScanner::read_bits(unsigned width) {
    if (width == 0) return 0;
    ensure(pos_ + width);
    const std::uint64_t v = store_->contents().read_bits(pos_, width);
    pos_ += width;
    return v;
}

std::uint64_t BlockScanner::read_gamma() {
    const Bitstream& bits = store_->contents();
    if (charged_end_ >= pos_ + 64 && charged_end_ <= bits.size()) {
        // Whole code inside the next 64 charged bits.
        const std::uint64_t v = bits.get_bits(pos_, 64);
        const auto lz = static_cast<unsigned>(std::countl_zero(v));
        if (2 * lz + 1 <= 64) {
            pos_ += 2 * lz + 1;
            return v >> (63 - 2 * lz);
        }
    }
    unsigned zeros = 0;
    for (;;) {
        ensure(pos_ + 1);
        // Only look at bits in blocks already charged.
        const auto w = static_cast<unsigned>(std::min<std::uint64_t>(64, charged_end_ - pos_));
        const std::uint64_t v = bits.read_bits(pos_, w);
        if (v == 0) {
            zeros += w;
            pos_ += w;
            require(zeros < 64, ErrorCode::kCorruptStream, "gamma code too long");
            continue;
        }
        const auto lz = static_cast<unsigned>(std::countl_zero(v)) - (64 - w);
        zeros += lz;
        pos_ += lz;
        break;
    }
    require(zeros < 64, ErrorCode::kCorruptStream, "gamma code too long");
    return read_bits(zeros + 1);
}

}  // namespace rix
