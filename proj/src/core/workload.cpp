#include "rangeindex/workload.hpp"

#include <charconv>
#include <sstream>

#include "rangeindex/errors.hpp"

namespace rix {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
    fail(ErrorCode::kParse, "workload line " + std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_int(std::string_view tok, std::size_t line_no) {
    T v{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        parse_error(line_no, "bad integer '" + std::string(tok) + "'");
    return v;
}

double parse_double(std::string_view tok, std::size_t line_no) {
    std::string s(tok);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        parse_error(line_no, "bad number '" + s + "'");
    }
    if (used != s.size()) parse_error(line_no, "bad number '" + s + "'");
    return v;
}

}  // namespace

std::optional<WorkloadOp> parse_workload_line(std::string_view line, std::size_t line_no) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].front() == '#') return std::nullopt;
    WorkloadOp op;
    const std::string_view cmd = tok[0];
    auto want = [&](std::size_t n) {
        if (tok.size() != n) parse_error(line_no, "expected " + std::to_string(n - 1) + " arguments for " + std::string(cmd));
    };
    if (cmd == "A") {
        want(2);
        op.kind = OpKind::kAppend;
        op.ch = parse_int<std::uint32_t>(tok[1], line_no);
    } else if (cmd == "C") {
        want(3);
        op.kind = OpKind::kChange;
        op.pos = parse_int<std::uint64_t>(tok[1], line_no);
        op.ch = parse_int<std::uint32_t>(tok[2], line_no);
    } else if (cmd == "D") {
        want(2);
        op.kind = OpKind::kDelete;
        op.pos = parse_int<std::uint64_t>(tok[1], line_no);
    } else if (cmd == "Q") {
        want(3);
        op.kind = OpKind::kQuery;
        op.lo = parse_int<std::uint32_t>(tok[1], line_no);
        op.hi = parse_int<std::uint32_t>(tok[2], line_no);
    } else if (cmd == "QA") {
        want(4);
        op.kind = OpKind::kApproxQuery;
        op.lo = parse_int<std::uint32_t>(tok[1], line_no);
        op.hi = parse_int<std::uint32_t>(tok[2], line_no);
        op.epsilon = parse_double(tok[3], line_no);
    } else {
        parse_error(line_no, "unknown operation '" + std::string(cmd) + "'");
    }
    return op;
}

std::vector<WorkloadOp> parse_workload(std::string_view text) {
    std::vector<WorkloadOp> ops;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        if (auto op = parse_workload_line(text.substr(start, end - start), line_no)) ops.push_back(*op);
        if (end == text.size()) break;
        start = end + 1;
    }
    return ops;
}

std::string format_workload_op(const WorkloadOp& op) {
    std::ostringstream os;
    switch (op.kind) {
        case OpKind::kAppend: os << "A " << op.ch; break;
        case OpKind::kChange: os << "C " << op.pos << ' ' << op.ch; break;
        case OpKind::kDelete: os << "D " << op.pos; break;
        case OpKind::kQuery: os << "Q " << op.lo << ' ' << op.hi; break;
        case OpKind::kApproxQuery: os << "QA " << op.lo << ' ' << op.hi << ' ' << op.epsilon; break;
    }
    return os.str();
}

}  // namespace rix
