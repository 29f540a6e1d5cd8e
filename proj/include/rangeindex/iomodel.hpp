#pragma once

// Simulated external memory. A BlockStore is a flat array of B-bit blocks;
// every block touched by a read or write is charged to IOStats. There is no
// cache inside the store: callers that keep data in internal memory do so
// explicitly and declare the working set through note_working_set().

#include <cstdint>
#include <string>

#include "rangeindex/bitcodec.hpp"

namespace rix {

struct IOConfig {
    std::uint64_t block_bits = 8192;     // B
    std::uint64_t memory_bits = 1u << 22;  // M
    std::uint64_t n_max = std::uint64_t{1} << 32;

    // Bits in a machine word able to address n_max positions.
    unsigned word_bits() const noexcept;
    // b: words per block.
    std::uint64_t word_block() const noexcept { return block_bits / word_bits(); }
    // Throws kInvalidArgument when B < lg n_max, b < 2 or M < B.
    void validate() const;
};

struct IOStats {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t peak_working_set_bits = 0;

    std::uint64_t total() const noexcept { return reads + writes; }
};

using BlockAddr = std::uint64_t;

class BlockStore {
public:
    explicit BlockStore(IOConfig config = {});

    const IOConfig& config() const noexcept { return config_; }
    std::uint64_t block_bits() const noexcept { return config_.block_bits; }
    std::uint64_t block_count() const noexcept { return blocks_; }
    std::uint64_t size_bits() const noexcept { return blocks_ * config_.block_bits; }

    // Appends `count` zeroed blocks and returns the first address. Allocation
    // itself is free; only the later reads and writes are charged.
    BlockAddr allocate(std::uint64_t count = 1);

    Bitstream read_block(BlockAddr addr);
    void write_block(BlockAddr addr, const Bitstream& data);

    // Reads [start_bit, start_bit + len_bits), charging one read per spanned block.
    Bitstream stream_read(std::uint64_t start_bit, std::uint64_t len_bits);
    // Writes data at start_bit, charging one write per spanned block.
    void stream_write(std::uint64_t start_bit, const Bitstream& data);
    // Allocates enough fresh blocks for `data`, writes it, and returns the
    // global bit offset of its first bit (always block aligned).
    std::uint64_t append_region(const Bitstream& data);

    // Uncharged access for inspection tools and invariant checks only.
    Bitstream peek(std::uint64_t start_bit, std::uint64_t len_bits) const;

    // Zero-copy reading: charge a block, then decode it in place from
    // contents(). Callers must charge every block they decode from.
    void charge_read(BlockAddr addr);
    // Charges exactly what stream_read would, without copying.
    void charge_stream_read(std::uint64_t start_bit, std::uint64_t len_bits);
    const Bitstream& contents() const noexcept { return bits_; }

    // Drops every block and the counters, keeping the configuration.
    void clear() noexcept;

    IOStats snapshot() const noexcept { return stats_; }
    void reset_stats() noexcept { stats_ = {}; }

    // Records the internal-memory footprint of the running operation. Throws
    // kPrecondition if it exceeds M.
    void note_working_set(std::uint64_t bits);

    // Snapshot file: magic, version byte, IOConfig, block count, raw blocks.
    void save(const std::string& path) const;
    static BlockStore load(const std::string& path);

private:
    void check_range(std::uint64_t start_bit, std::uint64_t len_bits) const;
    std::uint64_t span_blocks(std::uint64_t start_bit, std::uint64_t len_bits) const noexcept;

    IOConfig config_;
    std::uint64_t blocks_ = 0;
    Bitstream bits_;
    IOStats stats_;
};

// Forward scan from a bit offset that fetches each block, charged, the first
// time a bit inside it is needed. Used to decode self-delimiting data whose
// length is not known in advance.
class BlockScanner {
public:
    BlockScanner(BlockStore& store, std::uint64_t start_bit);
    bool read_bit();
    std::uint64_t read_bits(unsigned width);
    std::uint64_t read_gamma();
    // Global bit offset of the next unread bit.
    std::uint64_t position() const noexcept { return pos_; }
    std::uint64_t blocks_read() const noexcept { return blocks_; }

private:
    void ensure(std::uint64_t end_bit);

    BlockStore* store_;
    std::uint64_t pos_;
    std::uint64_t charged_end_;  // blocks before this bit offset have been read
    std::uint64_t blocks_ = 0;
};

// Charged-blocks formula for a range: floor((s+len-1)/B) - floor(s/B) + 1.
std::uint64_t blocks_spanned(std::uint64_t start_bit, std::uint64_t len_bits, std::uint64_t block_bits);

}  // namespace rix
