#pragma once

// Brute-force reference implementations. Nothing in here may depend on the
// index code; differential tests compare the two.

#include <cstdint>
#include <span>
#include <vector>

#include "rangeindex/workload.hpp"

namespace rix::oracle {

struct OracleString {
    std::vector<std::uint32_t> chars;
};

std::vector<std::uint64_t> range(std::span<const std::uint32_t> s, std::uint32_t lo, std::uint32_t hi);
std::uint64_t count(std::span<const std::uint32_t> s, std::uint32_t lo, std::uint32_t hi);
// Sum over characters of (z_a / n) lg(n / z_a), in bits per character.
double entropy(std::span<const std::uint32_t> s);
// Applies A/C/D; queries leave the string unchanged. Deletion removes the
// character, shifting later positions down.
void apply(OracleString& s, const WorkloadOp& op);

}  // namespace rix::oracle
