// rix: command-line front end over the rangeindex C API.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rangeindex/rangeindex.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitMismatch = 3;

struct CliError {
    int code;
    std::string message;
};

[[noreturn]] void die(int code, const std::string& message) { throw CliError{code, message}; }

void check(ri_status s, const std::string& what) {
    if (s == RI_OK) return;
    die(s == RI_MISMATCH ? kExitMismatch : kExitData, what + ": " + ri_last_error());
}

struct IndexDeleter {
    void operator()(ri_index* p) const { ri_free(p); }
};
struct ResultDeleter {
    void operator()(ri_result* p) const { ri_result_free(p); }
};
using IndexPtr = std::unique_ptr<ri_index, IndexDeleter>;
using ResultPtr = std::unique_ptr<ri_result, ResultDeleter>;

std::optional<std::uint64_t> parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    if (s.empty()) return std::nullopt;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::uint64_t effective_seed(std::uint64_t flag) {
    if (const char* env = std::getenv("RANGEINDEX_SEED")) {
        const auto v = parse_u64(env);
        if (!v) die(kExitUsage, "RANGEINDEX_SEED is not an unsigned integer");
        return *v;
    }
    return flag;
}

// Sorted-unique value list mapping column values to dense characters.
// Numeric when every value is a decimal integer, lexicographic otherwise.
class Dictionary {
public:
    static Dictionary from_tokens(const std::vector<std::string>& tokens) {
        Dictionary d;
        d.numeric_ = std::all_of(tokens.begin(), tokens.end(), [](const std::string& t) { return parse_u64(t).has_value(); });
        if (d.numeric_) {
            for (const auto& t : tokens) d.nums_.push_back(*parse_u64(t));
            std::sort(d.nums_.begin(), d.nums_.end());
            d.nums_.erase(std::unique(d.nums_.begin(), d.nums_.end()), d.nums_.end());
        } else {
            d.strs_ = tokens;
            std::sort(d.strs_.begin(), d.strs_.end());
            d.strs_.erase(std::unique(d.strs_.begin(), d.strs_.end()), d.strs_.end());
        }
        return d;
    }

    bool numeric() const { return numeric_; }
    std::size_t size() const { return numeric_ ? nums_.size() : strs_.size(); }

    // Index of the first value >= token (or > token when strict).
    std::size_t lower(const std::string& token, bool strict) const {
        if (numeric_) {
            const auto v = parse_u64(token);
            if (!v) die(kExitData, "'" + token + "' is not a numeric value");
            return strict ? std::upper_bound(nums_.begin(), nums_.end(), *v) - nums_.begin()
                          : std::lower_bound(nums_.begin(), nums_.end(), *v) - nums_.begin();
        }
        return strict ? std::upper_bound(strs_.begin(), strs_.end(), token) - strs_.begin()
                      : std::lower_bound(strs_.begin(), strs_.end(), token) - strs_.begin();
    }

    std::optional<std::uint32_t> code(const std::string& token) const {
        const std::size_t i = lower(token, false);
        if (i < size() && value(i) == canonical(token)) return static_cast<std::uint32_t>(i);
        return std::nullopt;
    }

    bool inverted(const std::string& lo, const std::string& hi) const {
        if (!numeric_) return hi < lo;
        const auto a = parse_u64(lo), b = parse_u64(hi);
        if (!a) die(kExitData, "'" + lo + "' is not a numeric value");
        if (!b) die(kExitData, "'" + hi + "' is not a numeric value");
        return *b < *a;
    }

    // Inward snap of [lo, hi] onto dictionary codes; nullopt when no value lies inside.
    std::optional<std::pair<std::uint32_t, std::uint32_t>> snap(const std::string& lo, const std::string& hi) const {
        const std::size_t a = lower(lo, false);
        const std::size_t b = lower(hi, true);  // one past the last value <= hi
        if (a >= b) return std::nullopt;
        return std::pair{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b - 1)};
    }

    std::string value(std::size_t i) const { return numeric_ ? std::to_string(nums_[i]) : strs_[i]; }

    void save(const fs::path& path) const {
        std::ofstream os(path);
        if (!os) die(kExitData, "cannot write " + path.string());
        os << (numeric_ ? "numeric" : "string") << '\n';
        for (std::size_t i = 0; i < size(); ++i) os << value(i) << '\n';
    }

    static Dictionary load(const fs::path& path) {
        std::ifstream is(path);
        if (!is) die(kExitData, "cannot open " + path.string());
        std::string kind, line;
        std::getline(is, kind);
        Dictionary d;
        if (kind == "numeric") d.numeric_ = true;
        else if (kind == "string") d.numeric_ = false;
        else die(kExitData, "bad dictionary header in " + path.string());
        while (std::getline(is, line)) {
            if (d.numeric_) {
                const auto v = parse_u64(line);
                if (!v) die(kExitData, "bad dictionary entry in " + path.string());
                d.nums_.push_back(*v);
            } else {
                d.strs_.push_back(line);
            }
        }
        const bool sorted = d.numeric_ ? std::adjacent_find(d.nums_.begin(), d.nums_.end(), std::greater_equal<>()) == d.nums_.end()
                                       : std::adjacent_find(d.strs_.begin(), d.strs_.end(), std::greater_equal<>()) == d.strs_.end();
        if (!sorted) die(kExitData, "dictionary in " + path.string() + " is not strictly increasing");
        return d;
    }

private:
    std::string canonical(const std::string& token) const {
        if (numeric_) {
            const auto v = parse_u64(token);
            return v ? std::to_string(*v) : std::string{};
        }
        return token;
    }

    bool numeric_ = true;
    std::vector<std::uint64_t> nums_;
    std::vector<std::string> strs_;
};

std::vector<std::string> read_text_column(const std::string& path) {
    std::ifstream is(path);
    if (!is) die(kExitData, "cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

std::vector<std::string> read_binary_column(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) die(kExitData, "cannot open " + path);
    std::vector<std::string> out;
    unsigned char b[4];
    while (true) {
        is.read(reinterpret_cast<char*>(b), 4);
        if (is.gcount() == 0) break;
        if (is.gcount() != 4) die(kExitData, path + ": length is not a multiple of 4 bytes");
        const std::uint32_t v = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
                                std::uint32_t{b[3]} << 24;
        out.push_back(std::to_string(v));
    }
    return out;
}

const std::map<std::string, ri_kind> kKinds = {{"uniform", RI_UNIFORM}, {"static", RI_STATIC}, {"dynamic", RI_DYNAMIC}};
const std::map<std::string, ri_variant> kVariants = {
    {"direct-append", RI_DIRECT_APPEND}, {"buffered-append", RI_BUFFERED_APPEND}, {"fully-dynamic", RI_FULLY_DYNAMIC}};

const char* kind_name(ri_kind k) {
    for (const auto& [name, v] : kKinds)
        if (v == k) return name.c_str();
    return "?";
}

const char* variant_label(ri_variant k) {
    for (const auto& [name, v] : kVariants)
        if (v == k) return name.c_str();
    return "?";
}

void print_report(ri_index* ix, std::ostream& os) {
    ri_info info;
    ri_space space;
    check(ri_get_info(ix, &info), "info");
    check(ri_get_space(ix, &space), "space");
    os << "kind: " << kind_name(info.kind);
    if (info.kind == RI_DYNAMIC) os << " (" << variant_label(info.variant) << ")";
    os << "\nn: " << info.n << "\nsigma: " << info.sigma << "\nH0: " << space.h0 << " bits/char"
       << "\nB: " << info.config.block_bits << " bits\nheight: " << info.height << "\ntotal: " << space.total_bits
       << " bits\ndata: " << space.data_bits << " bits\nstructure: " << space.structure_bits << " bits\n";
    if (info.kind == RI_STATIC) os << "hashed: " << space.hashed_bits << " bits (" << info.hash_levels << " levels)\n";
    if (info.kind == RI_DYNAMIC) os << "memory: " << space.memory_bits << " bits\n";
    const double model = info.n * space.h0 + info.n +
                         info.sigma * std::pow(std::log2(static_cast<double>(std::max<std::uint64_t>(info.n, 2))), 2);
    os << "total / (n H0 + n + sigma lg^2 n): " << space.total_bits / model << '\n';
}

// build

struct BuildArgs {
    std::string input, output, kind = "static", variant = "fully-dynamic", format = "text";
    std::uint64_t block_bits = 0, memory_bits = 0, seed = 1;
};

int cmd_build(const BuildArgs& a) {
    const auto tokens = a.format == "binary" ? read_binary_column(a.input) : read_text_column(a.input);
    if (tokens.empty()) die(kExitData, a.input + ": empty column");
    const Dictionary dict = Dictionary::from_tokens(tokens);
    if (dict.size() > UINT32_MAX) die(kExitData, "alphabet too large");
    std::vector<std::uint32_t> x;
    x.reserve(tokens.size());
    for (const auto& t : tokens) x.push_back(*dict.code(t));

    ri_config cfg;
    ri_config_default(&cfg);
    if (a.block_bits) cfg.block_bits = a.block_bits;
    if (a.memory_bits) cfg.memory_bits = a.memory_bits;
    ri_index* raw = nullptr;
    const ri_status st = ri_build(x.data(), x.size(), static_cast<std::uint32_t>(dict.size()), kKinds.at(a.kind),
                                  kVariants.at(a.variant), &cfg, effective_seed(a.seed), &raw);
    if (st == RI_INVALID_ARGUMENT) die(kExitUsage, std::string("invalid configuration: ") + ri_last_error());
    check(st, "build");
    IndexPtr ix(raw);

    std::error_code ec;
    fs::create_directories(a.output, ec);
    if (ec) die(kExitData, "cannot create " + a.output + ": " + ec.message());
    check(ri_set_meta(ix.get(), "source", (a.format + ":" + fs::path(a.input).filename().string()).c_str()), "metadata");
    check(ri_set_meta(ix.get(), "dictionary", dict.numeric() ? "numeric" : "string"), "metadata");
    check(ri_save(ix.get(), a.output.c_str()), "save");
    dict.save(fs::path(a.output) / "dictionary.txt");
    print_report(ix.get(), std::cout);
    return kExitOk;
}

IndexPtr open_index(const std::string& dir, Dictionary& dict) {
    if (!fs::is_directory(dir)) die(kExitData, "no index at " + dir);
    ri_index* raw = nullptr;
    check(ri_load(dir.c_str(), &raw), "load " + dir);
    IndexPtr ix(raw);
    dict = Dictionary::load(fs::path(dir) / "dictionary.txt");
    ri_info info;
    check(ri_get_info(ix.get(), &info), "info");
    if (info.sigma != dict.size()) die(kExitData, "dictionary does not match the index alphabet");
    return ix;
}

// query

struct QueryArgs {
    std::string index, lo, hi, format = "positions";
    double epsilon = 0;
};

void print_io(ri_index* ix) {
    ri_io_stats io;
    check(ri_get_io_stats(ix, &io), "io stats");
    std::cerr << "io: reads=" << io.reads << " writes=" << io.writes << " total=" << io.reads + io.writes << '\n';
}

int cmd_query(const QueryArgs& a) {
    Dictionary dict;
    IndexPtr ix = open_index(a.index, dict);
    ri_info info;
    check(ri_get_info(ix.get(), &info), "info");
    if (dict.inverted(a.lo, a.hi)) die(kExitUsage, "query: lo exceeds hi");
    const auto range = dict.snap(a.lo, a.hi);
    if (!range) {
        // No dictionary value inside the range.
        if (a.format == "count") std::cout << 0 << '\n';
        else if (a.format == "compressed")
            std::cout << "universe=" << info.n << " cardinality=0 bits=0 exact=1\n\n";
        print_io(ix.get());
        return kExitOk;
    }
    if (a.format == "count" && a.epsilon == 0) {
        std::uint64_t z = 0;
        check(ri_count(ix.get(), range->first, range->second, &z), "count");
        std::cout << z << '\n';
        print_io(ix.get());
        return kExitOk;
    }
    ri_result* raw = nullptr;
    const ri_status st = a.epsilon > 0 ? ri_query_approx(ix.get(), range->first, range->second, a.epsilon, &raw)
                                       : ri_query(ix.get(), range->first, range->second, &raw);
    if (st == RI_INVALID_ARGUMENT || st == RI_UNSUPPORTED) die(kExitUsage, std::string("query: ") + ri_last_error());
    check(st, "query");
    ResultPtr r(raw);
    if (a.format == "compressed") {
        std::size_t len = 0;
        check(ri_result_payload(r.get(), nullptr, 0, &len), "payload");
        std::vector<std::uint8_t> bytes(len);
        check(ri_result_payload(r.get(), bytes.data(), bytes.size(), &len), "payload");
        std::cout << "universe=" << ri_result_universe(r.get()) << " cardinality=" << ri_result_set_cardinality(r.get())
                  << " bits=" << ri_result_compressed_bits(r.get()) << " exact=" << ri_result_is_exact(r.get());
        if (!ri_result_is_exact(r.get())) std::cout << " level=" << ri_result_level(r.get());
        std::cout << '\n';
        static const char* hex = "0123456789abcdef";
        std::string line;
        for (auto b : bytes) {
            line.push_back(hex[b >> 4]);
            line.push_back(hex[b & 15]);
        }
        std::cout << line << '\n';
    } else {
        std::uint64_t k = 0;
        check(ri_result_members(r.get(), nullptr, 0, &k), "members");
        if (a.format == "count") {
            std::cout << k << '\n';
        } else {
            std::vector<std::uint64_t> members(k);
            check(ri_result_members(r.get(), members.data(), k, &k), "members");
            std::string out;
            for (auto p : members) {
                out += std::to_string(p);
                out += '\n';
            }
            std::cout << out;
        }
    }
    print_io(ix.get());
    return kExitOk;
}

// workload

struct WorkloadArgs {
    std::string index, workload, save;
    bool raw = false;
};

// Rewrites character fields of a workload from column values to dictionary
// codes. Line numbers are preserved; queries whose range holds no value
// become blank lines.
std::string map_workload(const std::string& text, const Dictionary& dict, std::uint64_t& skipped) {
    std::istringstream in(text);
    std::ostringstream out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        auto code_of = [&](const std::string& v) {
            const auto c = dict.code(v);
            if (!c) die(kExitData, "line " + std::to_string(line_no) + ": value '" + v + "' is not in the dictionary");
            return std::to_string(*c);
        };
        if (tok.empty() || tok[0].front() == '#') {
            out << '\n';
        } else if (tok[0] == "A" && tok.size() == 2) {
            out << "A " << code_of(tok[1]) << '\n';
        } else if (tok[0] == "C" && tok.size() == 3) {
            out << "C " << tok[1] << ' ' << code_of(tok[2]) << '\n';
        } else if ((tok[0] == "Q" && tok.size() == 3) || (tok[0] == "QA" && tok.size() == 4)) {
            const auto r = dict.snap(tok[1], tok[2]);
            if (!r) {
                ++skipped;
                out << '\n';
                continue;
            }
            out << tok[0] << ' ' << r->first << ' ' << r->second;
            if (tok.size() == 4) out << ' ' << tok[3];
            out << '\n';
        } else {
            out << line << '\n';  // left for the library parser to reject or accept
        }
    }
    return out.str();
}

int cmd_workload(const WorkloadArgs& a) {
    Dictionary dict;
    IndexPtr ix = open_index(a.index, dict);
    std::ifstream is(a.workload);
    if (!is) die(kExitData, "cannot open " + a.workload);
    std::stringstream buf;
    buf << is.rdbuf();
    std::uint64_t skipped = 0;
    const std::string text = a.raw ? buf.str() : map_workload(buf.str(), dict, skipped);

    ri_workload_report rep;
    const ri_status st = ri_run_workload(ix.get(), text.c_str(), &rep);
    if (st != RI_OK && st != RI_MISMATCH) check(st, "workload");
    std::cout << "ops: " << rep.ops << "\nupdates: " << rep.updates << "\nqueries: " << rep.queries
              << "\napprox queries: " << rep.approx_queries << "\nempty-range queries skipped: " << skipped
              << "\nmismatches: " << rep.mismatches << '\n';
    if (rep.updates) std::cout << "amortized update io: " << static_cast<double>(rep.update_io) / rep.updates << '\n';
    if (rep.queries + rep.approx_queries)
        std::cout << "mean query io: " << static_cast<double>(rep.query_io) / (rep.queries + rep.approx_queries) << '\n';
    if (rep.negatives_checked)
        std::cout << "approx false-positive rate: " << static_cast<double>(rep.false_positives) / rep.negatives_checked
                  << '\n';
    ri_dynamic_stats ds;
    if (ri_get_dynamic_stats(ix.get(), &ds) == RI_OK)
        std::cout << "rebuilds: " << ds.rebuilds << " (global " << ds.global_rebuilds << ", io " << ds.rebuild_io
                  << ")\ncompactions: " << ds.compactions << "\nflushes: " << ds.flushes << '\n';
    if (st == RI_MISMATCH) {
        std::cout << "FAIL first divergence at " << ri_last_error() << '\n';
        return kExitMismatch;
    }
    check(ri_check(ix.get()), "self-check");
    std::cout << "PASS\n";
    if (!a.save.empty()) {
        std::error_code ec;
        fs::create_directories(a.save, ec);
        if (ec) die(kExitData, "cannot create " + a.save);
        check(ri_save(ix.get(), a.save.c_str()), "save");
        dict.save(fs::path(a.save) / "dictionary.txt");
    }
    return kExitOk;
}

// bench

struct BenchConfig {
    std::uint64_t seed = 1;
    std::uint64_t block_bits = 8192;
    std::vector<std::uint64_t> sizes = {1000, 10000, 100000};
    std::uint32_t sigma = 64;
    std::uint64_t queries = 1000;
    std::vector<std::string> distributions = {"uniform", "zipf", "skewed"};
    std::vector<double> epsilons = {0.1, 0.01};
    std::uint64_t dynamic_n0 = 10000;
    std::vector<std::uint64_t> update_ops = {10000, 100000};
    std::vector<std::string> variants = {"direct-append", "buffered-append", "fully-dynamic"};
};

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    for (std::string t; std::getline(ss, t, ',');)
        if (!trim(t).empty()) out.push_back(trim(t));
    return out;
}

BenchConfig load_bench_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) die(kExitData, "cannot open " + path);
    BenchConfig c;
    std::string line;
    std::size_t line_no = 0;
    auto num = [&](const std::string& v) {
        const auto n = parse_u64(v);
        if (!n) die(kExitData, path + ":" + std::to_string(line_no) + ": expected an unsigned integer");
        return *n;
    };
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) die(kExitData, path + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
        if (k == "seed") c.seed = num(v);
        else if (k == "block_bits") c.block_bits = num(v);
        else if (k == "sigma") c.sigma = static_cast<std::uint32_t>(num(v));
        else if (k == "queries") c.queries = num(v);
        else if (k == "dynamic_n0") c.dynamic_n0 = num(v);
        else if (k == "sizes") {
            c.sizes.clear();
            for (const auto& t : split_list(v)) c.sizes.push_back(num(t));
        } else if (k == "update_ops") {
            c.update_ops.clear();
            for (const auto& t : split_list(v)) c.update_ops.push_back(num(t));
        } else if (k == "distributions") c.distributions = split_list(v);
        else if (k == "variants") c.variants = split_list(v);
        else if (k == "epsilons") {
            c.epsilons.clear();
            for (const auto& t : split_list(v)) c.epsilons.push_back(std::stod(t));
        } else die(kExitData, path + ":" + std::to_string(line_no) + ": unknown key '" + k + "'");
    }
    for (const auto& d : c.distributions)
        if (d != "uniform" && d != "zipf" && d != "skewed") die(kExitData, "unknown distribution '" + d + "'");
    for (const auto& v : c.variants)
        if (!kVariants.count(v)) die(kExitData, "unknown variant '" + v + "'");
    if (c.sigma < 2) die(kExitData, "sigma must be at least 2");
    return c;
}

std::vector<std::uint32_t> generate(const std::string& dist, std::uint64_t n, std::uint32_t sigma, std::mt19937_64& rng) {
    std::vector<std::uint32_t> x(n);
    if (dist == "uniform") {
        std::uniform_int_distribution<std::uint32_t> d(0, sigma - 1);
        for (auto& v : x) v = d(rng);
    } else if (dist == "zipf") {
        std::vector<double> w(sigma);
        for (std::uint32_t i = 0; i < sigma; ++i) w[i] = 1.0 / (i + 1);
        std::discrete_distribution<std::uint32_t> d(w.begin(), w.end());
        for (auto& v : x) v = d(rng);
    } else {
        std::bernoulli_distribution d(0.1);
        for (auto& v : x) v = d(rng) ? 1 : 0;
    }
    return x;
}

struct Row {
    std::string bound, workload;
    double measured = 0, model = 0;
};

double lg(double v) { return std::log2(std::max(v, 2.0)); }

int cmd_bench(const std::string& config_path, const std::string& out_path) {
    const BenchConfig c = load_bench_config(config_path);
    const std::uint64_t seed = effective_seed(c.seed);
    ri_config cfg;
    ri_config_default(&cfg);
    cfg.block_bits = c.block_bits;
    const double B = static_cast<double>(c.block_bits);
    const double b = B / std::ceil(std::log2(static_cast<double>(cfg.n_max)));
    std::vector<Row> rows;

    for (const auto& dist : c.distributions) {
        for (std::uint64_t n : c.sizes) {
            std::mt19937_64 rng(seed ^ (n * 0x9e3779b97f4a7c15ULL) ^ std::hash<std::string>{}(dist));
            const std::uint32_t sigma = dist == "skewed" ? 2 : c.sigma;
            const auto x = generate(dist, n, sigma, rng);
            const std::string wl = dist + "-n" + std::to_string(n);
            // Query ranges with widths spread geometrically so z covers 1..n.
            std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges;
            std::uniform_real_distribution<double> u(0, std::log2(static_cast<double>(sigma)));
            for (std::uint64_t q = 0; q < c.queries; ++q) {
                const auto w = std::min<std::uint32_t>(sigma, static_cast<std::uint32_t>(std::exp2(u(rng))));
                const auto lo = std::uniform_int_distribution<std::uint32_t>(0, sigma - w)(rng);
                ranges.emplace_back(lo, lo + w - 1);
            }
            const double nav = std::log(static_cast<double>(n)) / std::log(b) + lg(lg(static_cast<double>(n)));

            for (ri_kind kind : {RI_UNIFORM, RI_STATIC}) {
                ri_index* raw = nullptr;
                check(ri_build(x.data(), n, sigma, kind, RI_DIRECT_APPEND, &cfg, seed, &raw), "build");
                IndexPtr ix(raw);
                double meas = 0, model = 0;
                for (auto [lo, hi] : ranges) {
                    ri_reset_io_stats(ix.get());
                    ri_result* r = nullptr;
                    check(ri_query(ix.get(), lo, hi, &r), "query");
                    const double z = static_cast<double>(ri_result_set_cardinality(r));
                    ri_result_free(r);
                    ri_io_stats io;
                    check(ri_get_io_stats(ix.get(), &io), "io");
                    meas += static_cast<double>(io.reads + io.writes);
                    const double t = z > 0 ? z * std::log2(static_cast<double>(n) / z) + z : 0;
                    model += kind == RI_UNIFORM ? t / B + lg(sigma) : t / B + nav;
                }
                rows.push_back({kind == RI_UNIFORM ? "uniform-query-io" : "static-query-io", wl, meas / ranges.size(),
                                model / ranges.size()});
                if (kind == RI_STATIC) {
                    ri_space sp;
                    check(ri_get_space(ix.get(), &sp), "space");
                    const double nn = static_cast<double>(n);
                    rows.push_back({"static-space-bits", wl, static_cast<double>(sp.total_bits),
                                    nn * sp.h0 + nn + sigma * lg(nn) * lg(nn)});
                    for (double eps : c.epsilons) {
                        double m2 = 0, mod2 = 0;
                        for (auto [lo, hi] : ranges) {
                            ri_reset_io_stats(ix.get());
                            ri_result* r = nullptr;
                            check(ri_query_approx(ix.get(), lo, hi, eps, &r), "approx query");
                            ri_result_free(r);
                            std::uint64_t z = 0;
                            ri_io_stats io;
                            check(ri_get_io_stats(ix.get(), &io), "io");
                            m2 += static_cast<double>(io.reads + io.writes);
                            check(ri_count(ix.get(), lo, hi, &z), "count");
                            mod2 += static_cast<double>(z) * std::log2(1 / eps) / B + nav;
                        }
                        std::ostringstream name;
                        name << "approx-query-io-eps" << eps;
                        rows.push_back({name.str(), wl, m2 / ranges.size(), mod2 / ranges.size()});
                    }
                }
            }
        }
    }

    for (const auto& vname : c.variants) {
        const ri_variant v = kVariants.at(vname);
        for (std::uint64_t ops : c.update_ops) {
            std::mt19937_64 rng(seed ^ ops ^ static_cast<std::uint64_t>(v) << 40);
            const auto x = generate("uniform", c.dynamic_n0, c.sigma, rng);
            ri_index* raw = nullptr;
            check(ri_build(x.data(), x.size(), c.sigma, RI_DYNAMIC, v, &cfg, seed, &raw), "build");
            IndexPtr ix(raw);
            std::uniform_int_distribution<std::uint32_t> ch(0, c.sigma - 1);
            std::uint64_t size = x.size();
            for (std::uint64_t i = 0; i < ops; ++i) {
                const unsigned pick = v == RI_FULLY_DYNAMIC ? static_cast<unsigned>(rng() % 3) : 0;
                if (pick == 0 || size == 0) {
                    check(ri_append(ix.get(), ch(rng)), "append");
                    ++size;
                } else if (pick == 1) {
                    check(ri_change(ix.get(), rng() % size, ch(rng)), "change");
                } else {
                    check(ri_delete(ix.get(), rng() % size), "delete");
                    --size;
                }
            }
            ri_dynamic_stats ds;
            check(ri_get_dynamic_stats(ix.get(), &ds), "stats");
            const double n = static_cast<double>(std::max<std::uint64_t>(size, 2));
            const double model = v == RI_DIRECT_APPEND ? lg(lg(n)) : v == RI_BUFFERED_APPEND ? lg(n) / b : lg(n) * lg(lg(n)) / b;
            rows.push_back({vname + "-update-io", "n0-" + std::to_string(c.dynamic_n0) + "-ops" + std::to_string(ops),
                            static_cast<double>(ds.update_io) / std::max<std::uint64_t>(ds.updates, 1), model});
        }
    }

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) die(kExitData, "cannot write " + out_path);
    }
    std::ostream& os = out_path.empty() ? std::cout : file;
    os << "bound,workload,measured,model,fitted_c\n";
    for (const auto& r : rows)
        os << r.bound << ',' << r.workload << ',' << r.measured << ',' << r.model << ','
           << (r.model > 0 ? r.measured / r.model : 0.0) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressed alphabet-range index over a column of values."};
    app.require_subcommand(1);

    BuildArgs build;
    auto* b = app.add_subcommand("build", "Index a column file and persist it in a directory.");
    b->add_option("input", build.input, "Column file")->required();
    b->add_option("output", build.output, "Index directory (created)")->required();
    b->add_option("--variant", build.kind, "Index kind")->check(CLI::IsMember({"uniform", "static", "dynamic"}));
    b->add_option("--dynamic", build.variant, "Dynamic variant")
        ->check(CLI::IsMember({"direct-append", "buffered-append", "fully-dynamic"}));
    b->add_option("--input-format", build.format, "text: one value per line; binary: 32-bit little-endian")
        ->check(CLI::IsMember({"text", "binary"}));
    b->add_option("--B", build.block_bits, "Block size in bits");
    b->add_option("--M", build.memory_bits, "Internal memory in bits");
    b->add_option("--seed", build.seed, "Hash seed (RANGEINDEX_SEED overrides)");

    QueryArgs query;
    auto* q = app.add_subcommand(
        "query",
        "Report positions whose value lies in [lo, hi]. Bounds outside the dictionary snap inward to the nearest "
        "indexed values inside the range.");
    q->add_option("index", query.index, "Index directory")->required();
    q->add_option("lo", query.lo, "Lower bound (inclusive)")->required();
    q->add_option("hi", query.hi, "Upper bound (inclusive)")->required();
    q->add_option("--epsilon", query.epsilon, "False-positive rate of an approximate answer")
        ->check(CLI::Range(0.0, 1.0));
    q->add_option("--format", query.format, "Output format")->check(CLI::IsMember({"positions", "count", "compressed"}));

    WorkloadArgs work;
    auto* w = app.add_subcommand("workload", "Apply a workload and check every query against a reference scan.");
    w->add_option("index", work.index, "Index directory")->required();
    w->add_option("workload", work.workload, "Workload file (A c | C i c | D i | Q lo hi | QA lo hi eps)")->required();
    w->add_flag("--raw", work.raw, "Characters are dictionary codes, not column values");
    w->add_option("--save", work.save, "Persist the updated index to this directory");

    std::string bench_config, bench_out;
    auto* be = app.add_subcommand("bench", "Fit bound constants and print CSV.");
    be->add_option("config", bench_config, "key=value bench configuration")->required();
    be->add_option("--out", bench_out, "Write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*b) return cmd_build(build);
        if (*q) return cmd_query(query);
        if (*w) return cmd_workload(work);
        if (*be) return cmd_bench(bench_config, bench_out);
    } catch (const CliError& e) {
        std::cerr << "rix: " << e.message << '\n';
        return e.code;
    }
    return kExitUsage;
}
