#include "rangeindex/rangeindex.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "rangeindex/approx.hpp"
#include "rangeindex/dynamic.hpp"
#include "rangeindex/errors.hpp"
#include "rangeindex/manifest.hpp"
#include "rangeindex/oracle.hpp"
#include "rangeindex/uniform_index.hpp"
#include "rangeindex/wbb_index.hpp"
#include "rangeindex/workload.hpp"

using namespace rix;

struct ri_index {
    ri_kind kind = RI_UNIFORM;
    ri_variant variant = RI_DIRECT_APPEND;
    std::uint64_t seed = 1;
    std::uint32_t sigma = 0;
    std::unique_ptr<BlockStore> store;
    std::optional<UniformIndex> uniform;
    std::optional<WbbIndex> wbb;
    std::optional<ApproxIndex> approx;
    std::unique_ptr<DynamicIndex> dynamic;
    std::vector<std::uint32_t> column;  // static kinds: the indexed string, kept for verification
    std::map<std::string, std::string> meta;
};

struct ri_result {
    ApproxResult value;
};

namespace {

constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kBlocksFile = "blocks.bin";
constexpr const char* kColumnFile = "column.bin";

thread_local std::string g_error;

ri_status to_status(ErrorCode c) {
    switch (c) {
        case ErrorCode::kInvalidArgument: return RI_INVALID_ARGUMENT;
        case ErrorCode::kCorruptStream: return RI_CORRUPT;
        case ErrorCode::kAddress: return RI_ADDRESS;
        case ErrorCode::kPrecondition: return RI_PRECONDITION;
        case ErrorCode::kParse: return RI_PARSE;
        case ErrorCode::kUnsupported: return RI_UNSUPPORTED;
        case ErrorCode::kIo: return RI_IO;
    }
    return RI_INTERNAL;
}

template <class F>
ri_status guarded(F&& f) {
    try {
        g_error.clear();
        return f();
    } catch (const Error& e) {
        g_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_error = "out of memory";
        return RI_INTERNAL;
    } catch (const std::exception& e) {
        g_error = e.what();
        return RI_INTERNAL;
    }
}

ri_status fail_with(ri_status s, const std::string& msg) {
    g_error = msg;
    return s;
}

IOConfig to_io(const ri_config* c) {
    IOConfig io;
    if (c) {
        io.block_bits = c->block_bits;
        io.memory_bits = c->memory_bits;
        io.n_max = c->n_max;
    }
    io.validate();
    return io;
}

ri_config from_io(const IOConfig& io) { return {io.block_bits, io.memory_bits, io.n_max}; }

DynamicVariant to_variant(ri_variant v) {
    switch (v) {
        case RI_DIRECT_APPEND: return DynamicVariant::kDirectAppend;
        case RI_BUFFERED_APPEND: return DynamicVariant::kBufferedAppend;
        case RI_FULLY_DYNAMIC: return DynamicVariant::kFullyDynamic;
    }
    fail(ErrorCode::kInvalidArgument, "unknown dynamic variant");
}

ri_variant from_variant(DynamicVariant v) {
    switch (v) {
        case DynamicVariant::kDirectAppend: return RI_DIRECT_APPEND;
        case DynamicVariant::kBufferedAppend: return RI_BUFFERED_APPEND;
        case DynamicVariant::kFullyDynamic: return RI_FULLY_DYNAMIC;
    }
    return RI_DIRECT_APPEND;
}

const char* kind_name(ri_kind k) {
    switch (k) {
        case RI_UNIFORM: return "uniform";
        case RI_STATIC: return "static";
        case RI_DYNAMIC: return "dynamic";
    }
    return "?";
}

bool valid_meta_key(const char* key) {
    if (!key || !*key) return false;
    for (const char* p = key; *p; ++p) {
        const char c = *p;
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.')) return false;
    }
    return true;
}

void write_column(const std::filesystem::path& path, const std::vector<std::uint32_t>& s) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::kIo, "cannot write column file");
    for (std::uint32_t v : s) {
        const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        os.write(reinterpret_cast<const char*>(b), 4);
    }
    require(static_cast<bool>(os), ErrorCode::kIo, "cannot write column file");
}

std::vector<std::uint32_t> read_column(const std::filesystem::path& path, std::uint64_t n) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), ErrorCode::kIo, "cannot open column file");
    std::vector<std::uint32_t> s(n);
    for (auto& v : s) {
        unsigned char b[4];
        is.read(reinterpret_cast<char*>(b), 4);
        require(static_cast<bool>(is), ErrorCode::kCorruptStream, "column file is truncated");
        v = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
    }
    require(is.peek() == std::char_traits<char>::eof(), ErrorCode::kCorruptStream, "column file has trailing data");
    return s;
}

double entropy_of_counts(const std::vector<std::uint64_t>& counts) {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    if (n == 0) return 0;
    double h = 0;
    for (auto c : counts)
        if (c) h += static_cast<double>(c) / n * std::log2(static_cast<double>(n) / c);
    return h;
}

std::vector<std::uint32_t> current_string(const ri_index* ix) {
    return ix->dynamic ? ix->dynamic->peek_string() : ix->column;
}

std::uint64_t current_size(const ri_index* ix) {
    if (ix->dynamic) return ix->dynamic->size();
    return ix->column.size();
}

void check_query_range(const ri_index* ix, std::uint32_t lo, std::uint32_t hi) {
    require(lo <= hi && hi < ix->sigma, ErrorCode::kInvalidArgument, "query range outside the alphabet");
}

CompressedBitmap exact_query(ri_index* ix, std::uint32_t lo, std::uint32_t hi) {
    check_query_range(ix, lo, hi);
    if (ix->dynamic) return ix->dynamic->range_query(lo, hi);
    if (ix->wbb) return ix->wbb->range_query(lo, hi);
    return ix->uniform->range_query(lo, hi);
}

ApproxResult approx_query(ri_index* ix, std::uint32_t lo, std::uint32_t hi, double eps) {
    check_query_range(ix, lo, hi);
    require(eps > 0 && eps < 1, ErrorCode::kInvalidArgument, "epsilon must lie in (0, 1)");
    if (ix->dynamic) return ix->dynamic->approx_query(lo, hi, eps);
    require(ix->approx.has_value(), ErrorCode::kUnsupported, "approximate queries need a static or dynamic index");
    return ix->approx->query(lo, hi, eps);
}

void require_dynamic(const ri_index* ix) {
    require(ix->dynamic != nullptr, ErrorCode::kUnsupported, "updates need a dynamic index");
}

}  // namespace

extern "C" {

const char* ri_last_error(void) { return g_error.c_str(); }

const char* ri_status_name(ri_status s) {
    switch (s) {
        case RI_OK: return "ok";
        case RI_INVALID_ARGUMENT: return "invalid argument";
        case RI_CORRUPT: return "corrupt data";
        case RI_ADDRESS: return "bad address";
        case RI_PRECONDITION: return "precondition violated";
        case RI_PARSE: return "parse error";
        case RI_UNSUPPORTED: return "unsupported";
        case RI_IO: return "i/o error";
        case RI_MISMATCH: return "mismatch";
        case RI_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void ri_config_default(ri_config* config) {
    if (config) *config = from_io(IOConfig{});
}

ri_status ri_build(const uint32_t* x, uint64_t n, uint32_t sigma, ri_kind kind, ri_variant variant,
                   const ri_config* config, uint64_t seed, ri_index** out) {
    return guarded([&] {
        if (!out || (!x && n > 0)) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        *out = nullptr;
        if (sigma == 0) return fail_with(RI_INVALID_ARGUMENT, "sigma must be positive");
        const std::span<const std::uint32_t> s(x, n);
        for (std::uint32_t v : s)
            if (v >= sigma) return fail_with(RI_INVALID_ARGUMENT, "character outside [0, sigma)");
        auto ix = std::make_unique<ri_index>();
        ix->kind = kind;
        ix->seed = seed;
        ix->sigma = sigma;
        ix->store = std::make_unique<BlockStore>(to_io(config));
        switch (kind) {
            case RI_UNIFORM:
                if (n == 0) return fail_with(RI_INVALID_ARGUMENT, "static indexes need a nonempty string");
                ix->uniform.emplace(UniformIndex::build(s, sigma, *ix->store));
                ix->column.assign(s.begin(), s.end());
                break;
            case RI_STATIC:
                if (n == 0) return fail_with(RI_INVALID_ARGUMENT, "static indexes need a nonempty string");
                ix->wbb.emplace(WbbIndex::build(s, sigma, *ix->store));
                ix->approx.emplace(ApproxIndex::build(*ix->wbb, HashFamily::create(n, seed)));
                ix->column.assign(s.begin(), s.end());
                break;
            case RI_DYNAMIC:
                ix->variant = variant;
                ix->dynamic = std::make_unique<DynamicIndex>(s, sigma, *ix->store, to_variant(variant), seed);
                break;
            default:
                return fail_with(RI_INVALID_ARGUMENT, "unknown index kind");
        }
        ix->store->reset_stats();
        *out = ix.release();
        return RI_OK;
    });
}

ri_status ri_save(const ri_index* ix, const char* dir) {
    return guarded([&] {
        if (!ix || !dir) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        const std::filesystem::path base(dir);
        require(std::filesystem::is_directory(base), ErrorCode::kIo, "output directory does not exist");
        Manifest m;
        if (ix->uniform) ix->uniform->describe(m);
        if (ix->wbb) ix->wbb->describe(m);
        if (ix->approx) ix->approx->describe(m);
        m.set("index.kind", kind_name(ix->kind));
        m.set_u64("index.seed", ix->seed);
        m.set_u64("index.sigma", ix->sigma);
        m.set_u64("index.n", current_size(ix));
        const IOConfig& io = ix->store->config();
        m.set_u64("io.block_bits", io.block_bits);
        m.set_u64("io.memory_bits", io.memory_bits);
        m.set_u64("io.n_max", io.n_max);
        for (const auto& [k, v] : ix->meta) m.set("meta." + k, v);
        if (ix->dynamic) {
            m.set("index.variant", variant_name(ix->dynamic->variant()));
            write_column(base / kColumnFile, ix->dynamic->peek_string());
        } else {
            ix->store->save((base / kBlocksFile).string());
            write_column(base / kColumnFile, ix->column);
        }
        m.save((base / kManifestFile).string());
        return RI_OK;
    });
}

ri_status ri_load(const char* dir, ri_index** out) {
    return guarded([&] {
        if (!dir || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        *out = nullptr;
        const std::filesystem::path base(dir);
        const Manifest m = Manifest::load((base / kManifestFile).string());
        auto ix = std::make_unique<ri_index>();
        const std::string kind = m.get("index.kind");
        ix->seed = m.get_u64("index.seed");
        ix->sigma = static_cast<std::uint32_t>(m.get_u64("index.sigma"));
        const std::uint64_t n = m.get_u64("index.n");
        for (const auto& [k, v] : m.entries())
            if (k.rfind("meta.", 0) == 0) ix->meta[k.substr(5)] = v;
        if (kind == "dynamic") {
            ix->kind = RI_DYNAMIC;
            const auto variant = parse_variant(m.get("index.variant"));
            require(variant.has_value(), ErrorCode::kCorruptStream, "unknown dynamic variant in manifest");
            ix->variant = from_variant(*variant);
            IOConfig io;
            io.block_bits = m.get_u64("io.block_bits");
            io.memory_bits = m.get_u64("io.memory_bits");
            io.n_max = m.get_u64("io.n_max");
            io.validate();
            const auto s = read_column(base / kColumnFile, n);
            for (std::uint32_t v : s) require(v < ix->sigma, ErrorCode::kCorruptStream, "column character outside alphabet");
            ix->store = std::make_unique<BlockStore>(io);
            ix->dynamic = std::make_unique<DynamicIndex>(s, ix->sigma, *ix->store, *variant, ix->seed);
        } else if (kind == "uniform" || kind == "static") {
            ix->store = std::make_unique<BlockStore>(BlockStore::load((base / kBlocksFile).string()));
            if (kind == "uniform") {
                ix->kind = RI_UNIFORM;
                ix->uniform.emplace(UniformIndex::open(*ix->store, m));
            } else {
                ix->kind = RI_STATIC;
                ix->wbb.emplace(WbbIndex::open(*ix->store, m));
                ix->approx.emplace(ApproxIndex::open(*ix->wbb, m));
            }
            ix->column = read_column(base / kColumnFile, n);
        } else {
            return fail_with(RI_CORRUPT, "unknown index kind in manifest");
        }
        ix->store->reset_stats();
        *out = ix.release();
        return RI_OK;
    });
}

void ri_free(ri_index* ix) {
    if (!ix) return;
    // Members referring to the store go first.
    ix->dynamic.reset();
    ix->approx.reset();
    ix->wbb.reset();
    ix->uniform.reset();
    delete ix;
}

ri_status ri_set_meta(ri_index* ix, const char* key, const char* value) {
    return guarded([&] {
        if (!ix || !value) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        if (!valid_meta_key(key)) return fail_with(RI_INVALID_ARGUMENT, "metadata keys are [a-z0-9_.]+");
        if (std::strchr(value, '\n')) return fail_with(RI_INVALID_ARGUMENT, "metadata values are single lines");
        ix->meta[key] = value;
        return RI_OK;
    });
}

ri_status ri_get_meta(const ri_index* ix, const char* key, char* buf, size_t cap, size_t* len) {
    return guarded([&] {
        if (!ix || !key) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        const auto it = ix->meta.find(key);
        if (it == ix->meta.end()) return fail_with(RI_INVALID_ARGUMENT, "no such metadata key");
        if (len) *len = it->second.size();
        if (buf && cap > 0) {
            const size_t k = std::min(cap - 1, it->second.size());
            std::memcpy(buf, it->second.data(), k);
            buf[k] = '\0';
        }
        return RI_OK;
    });
}

ri_status ri_get_info(const ri_index* ix, ri_info* out) {
    return guarded([&] {
        if (!ix || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        *out = {};
        out->kind = ix->kind;
        out->variant = ix->variant;
        out->n = current_size(ix);
        out->sigma = ix->sigma;
        out->seed = ix->seed;
        out->config = from_io(ix->store->config());
        if (ix->uniform) out->height = ix->uniform->height();
        if (ix->wbb) out->height = ix->wbb->height();
        if (ix->dynamic) out->height = ix->dynamic->height();
        if (ix->approx) out->hash_levels = ix->approx->family().k();
        return RI_OK;
    });
}

ri_status ri_get_space(const ri_index* ix, ri_space* out) {
    return guarded([&] {
        if (!ix || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        *out = {};
        if (ix->uniform) {
            out->total_bits = ix->store->size_bits();
            out->data_bits = ix->uniform->data_bits();
            out->structure_bits = ix->uniform->directory_bits();
            const auto& prefix = ix->uniform->prefix_counts();
            std::vector<std::uint64_t> counts;
            for (std::size_t i = 0; i + 1 < prefix.size(); ++i) counts.push_back(prefix[i + 1] - prefix[i]);
            out->h0 = entropy_of_counts(counts);
        } else if (ix->wbb) {
            const WbbSpaceReport r = ix->wbb->space_report();
            out->total_bits = ix->store->size_bits();
            for (auto b : r.store_bits) out->data_bits += b;
            out->structure_bits = r.tree_bits;
            out->hashed_bits = ix->approx->total_hashed_bits();
            out->h0 = r.h0;
        } else {
            out->total_bits = ix->dynamic->space_bits();
            out->data_bits = out->total_bits;
            out->memory_bits = ix->dynamic->memory_bits();
            std::vector<std::uint64_t> counts(ix->sigma);
            for (std::uint32_t v : ix->dynamic->peek_string()) ++counts[v];
            out->h0 = entropy_of_counts(counts);
        }
        return RI_OK;
    });
}

ri_status ri_get_io_stats(const ri_index* ix, ri_io_stats* out) {
    if (!ix || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
    const IOStats s = ix->store->snapshot();
    out->reads = s.reads;
    out->writes = s.writes;
    return RI_OK;
}

void ri_reset_io_stats(ri_index* ix) {
    if (ix) ix->store->reset_stats();
}

ri_status ri_get_dynamic_stats(const ri_index* ix, ri_dynamic_stats* out) {
    if (!ix || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
    if (!ix->dynamic) return fail_with(RI_UNSUPPORTED, "not a dynamic index");
    const DynamicStats& s = ix->dynamic->stats();
    *out = {s.updates, s.update_io, s.rebuilds, s.rebuild_io, s.global_rebuilds, s.compactions, s.flushes};
    return RI_OK;
}

ri_status ri_count(ri_index* ix, uint32_t lo, uint32_t hi, uint64_t* out) {
    return guarded([&] {
        if (!ix || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        check_query_range(ix, lo, hi);
        if (ix->dynamic) *out = ix->dynamic->count_range(lo, hi);
        else if (ix->wbb) *out = ix->wbb->count_range(lo, hi);
        else *out = ix->uniform->count_range(lo, hi);
        return RI_OK;
    });
}

ri_status ri_query(ri_index* ix, uint32_t lo, uint32_t hi, ri_result** out) {
    return guarded([&] {
        if (!ix || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        *out = new ri_result{ApproxResult(exact_query(ix, lo, hi))};
        return RI_OK;
    });
}

ri_status ri_query_approx(ri_index* ix, uint32_t lo, uint32_t hi, double epsilon, ri_result** out) {
    return guarded([&] {
        if (!ix || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        *out = new ri_result{approx_query(ix, lo, hi, epsilon)};
        return RI_OK;
    });
}

ri_status ri_append(ri_index* ix, uint32_t ch) {
    return guarded([&] {
        if (!ix) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        require_dynamic(ix);
        require(ch < ix->sigma, ErrorCode::kInvalidArgument, "character outside [0, sigma)");
        ix->dynamic->append(ch);
        return RI_OK;
    });
}

ri_status ri_change(ri_index* ix, uint64_t i, uint32_t ch) {
    return guarded([&] {
        if (!ix) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        require_dynamic(ix);
        require(ch < ix->sigma, ErrorCode::kInvalidArgument, "character outside [0, sigma)");
        ix->dynamic->change(i, ch);
        return RI_OK;
    });
}

ri_status ri_delete(ri_index* ix, uint64_t i) {
    return guarded([&] {
        if (!ix) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        require_dynamic(ix);
        ix->dynamic->erase(i);
        return RI_OK;
    });
}

ri_status ri_peek_string(const ri_index* ix, uint32_t* buf, uint64_t cap, uint64_t* n) {
    return guarded([&] {
        if (!ix) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        const auto s = current_string(ix);
        if (n) *n = s.size();
        if (buf) std::memcpy(buf, s.data(), std::min<std::uint64_t>(cap, s.size()) * sizeof(std::uint32_t));
        return RI_OK;
    });
}

ri_status ri_check(const ri_index* ix) {
    return guarded([&] {
        if (!ix) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        if (ix->dynamic) ix->dynamic->check_invariants();
        return RI_OK;
    });
}

ri_status ri_run_workload(ri_index* ix, const char* text, ri_workload_report* report) {
    ri_workload_report rep{};
    const ri_status st = guarded([&] {
        if (!ix || !text) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        // Parse everything first so a bad line fails before any mutation.
        std::vector<std::pair<std::size_t, WorkloadOp>> ops;
        {
            const std::string_view all(text);
            std::size_t line_no = 0, at = 0;
            while (at <= all.size()) {
                const std::size_t nl = all.find('\n', at);
                const std::string_view line = all.substr(at, nl == std::string_view::npos ? all.npos : nl - at);
                ++line_no;
                if (auto op = parse_workload_line(line, line_no)) ops.emplace_back(line_no, *op);
                if (nl == std::string_view::npos) break;
                at = nl + 1;
            }
        }
        oracle::OracleString ref{current_string(ix)};
        std::string first;
        auto mismatch = [&](std::size_t line_no, const std::string& what) {
            if (rep.mismatches++ == 0) {
                rep.first_mismatch_line = line_no;
                first = "line " + std::to_string(line_no) + ": " + what;
            }
        };
        for (const auto& [line_no, op] : ops) {
            ++rep.ops;
            const IOStats before = ix->store->snapshot();
            switch (op.kind) {
                case OpKind::kAppend:
                case OpKind::kChange:
                case OpKind::kDelete: {
                    require_dynamic(ix);
                    try {
                        if (op.kind == OpKind::kAppend) {
                            require(op.ch < ix->sigma, ErrorCode::kInvalidArgument, "character outside [0, sigma)");
                            ix->dynamic->append(op.ch);
                        } else if (op.kind == OpKind::kChange) {
                            require(op.ch < ix->sigma, ErrorCode::kInvalidArgument, "character outside [0, sigma)");
                            ix->dynamic->change(op.pos, op.ch);
                        } else {
                            ix->dynamic->erase(op.pos);
                        }
                    } catch (const Error& e) {
                        throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
                    }
                    oracle::apply(ref, op);
                    ++rep.updates;
                    rep.update_io += ix->store->snapshot().total() - before.total();
                    break;
                }
                case OpKind::kQuery: {
                    const CompressedBitmap got = exact_query(ix, op.lo, op.hi);
                    ++rep.queries;
                    rep.query_io += ix->store->snapshot().total() - before.total();
                    const auto want = oracle::range(ref.chars, op.lo, op.hi);
                    if (got.universe() != ref.chars.size()) mismatch(line_no, "result universe differs from string length");
                    else if (decompress(got) != want)
                        mismatch(line_no, "Q " + std::to_string(op.lo) + " " + std::to_string(op.hi) + " returned " +
                                              std::to_string(got.cardinality()) + " positions, expected " +
                                              std::to_string(want.size()));
                    break;
                }
                case OpKind::kApproxQuery: {
                    const ApproxResult got = approx_query(ix, op.lo, op.hi, op.epsilon);
                    ++rep.approx_queries;
                    rep.query_io += ix->store->snapshot().total() - before.total();
                    const auto want = oracle::range(ref.chars, op.lo, op.hi);
                    bool ok = got.n() == ref.chars.size();
                    for (std::uint64_t p : want)
                        if (!ok || !got.contains(p)) {
                            ok = false;
                            break;
                        }
                    if (!ok) {
                        mismatch(line_no, "QA " + std::to_string(op.lo) + " " + std::to_string(op.hi) +
                                              " missed a true position");
                        break;
                    }
                    const std::uint64_t members = collect(got.members()).size();
                    rep.false_positives += members - want.size();
                    rep.negatives_checked += ref.chars.size() - want.size();
                    break;
                }
            }
        }
        if (rep.mismatches) return fail_with(RI_MISMATCH, first);
        return RI_OK;
    });
    if (report) *report = rep;
    return st;
}

int ri_result_is_exact(const ri_result* r) { return r && r->value.exact() ? 1 : 0; }

unsigned ri_result_level(const ri_result* r) { return r ? r->value.level().value_or(0) : 0; }

uint64_t ri_result_universe(const ri_result* r) { return r ? r->value.n() : 0; }

uint64_t ri_result_set_cardinality(const ri_result* r) { return r ? r->value.set().cardinality() : 0; }

uint64_t ri_result_compressed_bits(const ri_result* r) { return r ? r->value.set().payload().size() : 0; }

ri_status ri_result_payload(const ri_result* r, uint8_t* buf, size_t cap, size_t* len) {
    return guarded([&] {
        if (!r) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        const Bitstream& bits = r->value.set().payload();
        const size_t bytes = (bits.size() + 7) / 8;
        if (len) *len = bytes;
        if (!buf) return RI_OK;
        const size_t k = std::min(cap, bytes);
        std::memset(buf, 0, k);
        for (size_t i = 0; i < std::min<size_t>(bits.size(), k * 8); ++i)
            if (bits.bit(i)) buf[i / 8] |= static_cast<uint8_t>(0x80u >> (i % 8));
        return RI_OK;
    });
}

ri_status ri_result_contains(const ri_result* r, uint64_t i, int* out) {
    return guarded([&] {
        if (!r || !out) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        *out = r->value.contains(i) ? 1 : 0;
        return RI_OK;
    });
}

ri_status ri_result_members(const ri_result* r, uint64_t* buf, uint64_t cap, uint64_t* count) {
    return guarded([&] {
        if (!r) return fail_with(RI_INVALID_ARGUMENT, "null argument");
        PreimageCursor cur = r->value.members();
        std::uint64_t k = 0;
        while (auto p = cur.next()) {
            if (buf && k < cap) buf[k] = *p;
            ++k;
        }
        if (count) *count = k;
        return RI_OK;
    });
}

void ri_result_free(ri_result* r) { delete r; }

}  // extern "C"
