#include "rangeindex/oracle.hpp"

#include <cmath>
#include <map>

#include "rangeindex/errors.hpp"

namespace rix::oracle {

std::vector<std::uint64_t> range(std::span<const std::uint32_t> s, std::uint32_t lo, std::uint32_t hi) {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] >= lo && s[i] <= hi) out.push_back(i);
    return out;
}

std::uint64_t count(std::span<const std::uint32_t> s, std::uint32_t lo, std::uint32_t hi) {
    std::uint64_t z = 0;
    for (std::uint32_t c : s) z += (c >= lo && c <= hi);
    return z;
}

double entropy(std::span<const std::uint32_t> s) {
    if (s.empty()) return 0.0;
    std::map<std::uint32_t, std::uint64_t> freq;
    for (std::uint32_t c : s) ++freq[c];
    const double n = static_cast<double>(s.size());
    double h = 0.0;
    for (const auto& [c, z] : freq) {
        const double p = static_cast<double>(z) / n;
        h += p * std::log2(1.0 / p);
    }
    return h;
}

void apply(OracleString& s, const WorkloadOp& op) {
    switch (op.kind) {
        case OpKind::kAppend:
            s.chars.push_back(op.ch);
            break;
        case OpKind::kChange:
            require(op.pos < s.chars.size(), ErrorCode::kInvalidArgument, "change position out of range");
            s.chars[op.pos] = op.ch;
            break;
        case OpKind::kDelete:
            require(op.pos < s.chars.size(), ErrorCode::kInvalidArgument, "delete position out of range");
            s.chars.erase(s.chars.begin() + static_cast<std::ptrdiff_t>(op.pos));
            break;
        case OpKind::kQuery:
        case OpKind::kApproxQuery:
            break;
    }
}

}  // namespace rix::oracle
