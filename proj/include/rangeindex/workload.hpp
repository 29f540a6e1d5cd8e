#pragma once

// Workload lines, one operation per line:
//   A <char>                 append
//   C <pos> <char>           change
//   D <pos>                  delete (current-position semantics)
//   Q <lo> <hi>              exact range query
//   QA <lo> <hi> <epsilon>   approximate range query
// Blank lines and lines starting with '#' are ignored.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rix {

enum class OpKind { kAppend, kChange, kDelete, kQuery, kApproxQuery };

struct WorkloadOp {
    OpKind kind = OpKind::kQuery;
    std::uint64_t pos = 0;
    std::uint32_t ch = 0;
    std::uint32_t lo = 0;
    std::uint32_t hi = 0;
    double epsilon = 0.0;
};

// Returns nullopt for blank and comment lines; throws kParse (with the line
// number in the message) for malformed ones.
std::optional<WorkloadOp> parse_workload_line(std::string_view line, std::size_t line_no);
std::vector<WorkloadOp> parse_workload(std::string_view text);
std::string format_workload_op(const WorkloadOp& op);

}  // namespace rix
