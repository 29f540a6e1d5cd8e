// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rangeindex/approx.hpp"
#include "rangeindex/bitcodec.hpp"
#include "rangeindex/dynamic.hpp"
#include "rangeindex/iomodel.hpp"
#include "rangeindex/oracle.hpp"
#include "rangeindex/uniform_index.hpp"
#include "rangeindex/wbb_index.hpp"
#include "rangeindex/workload.hpp"

using namespace rix;

namespace {

// Tolerances.
constexpr double kRuntimeLimitSeconds = 300.0;  // criterion 1
constexpr double kStability = 2.0;              // max/min of fitted constants
constexpr double kSingleQueryFactor = 4.0;      // one query against the fitted model
constexpr double kFprFactor = 1.5;              // empirical FPR against epsilon
constexpr std::uint64_t kBlockBits = 8192;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double lg(double v) { return std::log2(std::max(v, 2.0)); }

IOConfig config(std::uint64_t block_bits, std::uint64_t n_max = std::uint64_t{1} << 32) {
    IOConfig c;
    c.block_bits = block_bits;
    c.memory_bits = std::uint64_t{1} << 30;
    c.n_max = n_max;
    return c;
}

struct Verdict {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

int g_failed = 0;

void report(int number, const char* name, const Verdict& v, double secs) {
    if (!v.pass) ++g_failed;
    std::printf("criterion %d %-34s %s  %s (%.1fs)\n", number, name, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Least-squares C for measured ~ C * model through the origin.
struct Fit {
    double num = 0, den = 0;
    std::vector<std::pair<double, double>> points;  // (measured, model)

    void add(double measured, double model) {
        num += measured * model;
        den += model * model;
        points.emplace_back(measured, model);
    }
    double c() const { return den > 0 ? num / den : 0; }
    double worst() const {
        double w = 0;
        for (auto [m, f] : points) w = std::max(w, m / (c() * f));
        return w;
    }
};

bool same_positions(const CompressedBitmap& bm, std::span<const std::uint64_t> want, std::uint64_t n) {
    if (bm.universe() != n || bm.cardinality() != want.size()) return false;
    GapCursor cur(bm);
    for (std::uint64_t p : want) {
        const auto g = cur.next();
        if (!g || *g != p) return false;
    }
    return true;
}

std::vector<std::uint32_t> uniform_string(std::mt19937_64& rng, std::size_t n, std::uint32_t sigma) {
    std::uniform_int_distribution<std::uint32_t> d(0, sigma - 1);
    std::vector<std::uint32_t> s(n);
    for (auto& c : s) c = d(rng);
    return s;
}

std::vector<std::uint32_t> zipf_string(std::mt19937_64& rng, std::size_t n, std::uint32_t sigma) {
    std::vector<double> w(sigma);
    for (std::uint32_t k = 0; k < sigma; ++k) w[k] = 1.0 / (k + 1);
    std::discrete_distribution<std::uint32_t> d(w.begin(), w.end());
    std::vector<std::uint32_t> s(n);
    for (auto& c : s) c = d(rng);
    return s;
}

std::vector<std::uint32_t> skewed_string(std::mt19937_64& rng, std::size_t n) {
    std::bernoulli_distribution d(0.1);
    std::vector<std::uint32_t> s(n);
    for (auto& c : s) c = d(rng) ? 1 : 0;
    return s;
}

// Character ranges with geometrically spread widths, so z covers 1..n.
std::pair<std::uint32_t, std::uint32_t> random_range(std::mt19937_64& rng, std::uint32_t sigma) {
    std::uniform_real_distribution<double> u(0, std::log2(static_cast<double>(sigma)));
    const auto w = std::clamp<std::uint32_t>(static_cast<std::uint32_t>(std::exp2(u(rng))), 1, sigma);
    const auto lo = std::uniform_int_distribution<std::uint32_t>(0, sigma - w)(rng);
    return {lo, lo + w - 1};
}

// ---------------------------------------------------------------------------
// 1. exact correctness

struct ExhaustiveCount {
    std::uint64_t strings = 0, cases = 0, mismatches = 0;
};

// Checks every string over [0, sigma) of length n with index in [begin, end).
void exhaustive_slice(unsigned n, unsigned sigma, std::uint64_t begin, std::uint64_t end, ExhaustiveCount& out) {
    BlockStore store(config(64, std::uint64_t{1} << 16));
    std::vector<std::uint32_t> x(n);
    std::vector<std::vector<std::uint64_t>> want(sigma * sigma);
    for (std::uint64_t s = begin; s < end; ++s) {
        std::uint64_t v = s;
        for (unsigned i = 0; i < n; ++i) {
            x[i] = static_cast<std::uint32_t>(v % sigma);
            v /= sigma;
        }
        for (unsigned lo = 0; lo < sigma; ++lo)
            for (unsigned hi = lo; hi < sigma; ++hi) want[lo * sigma + hi] = oracle::range(x, lo, hi);
        store.clear();
        auto u = UniformIndex::build(x, sigma, store);
        for (unsigned lo = 0; lo < sigma; ++lo)
            for (unsigned hi = lo; hi < sigma; ++hi) {
                ++out.cases;
                if (!same_positions(u.range_query(lo, hi), want[lo * sigma + hi], n)) ++out.mismatches;
            }
        store.clear();
        auto w = WbbIndex::build(x, sigma, store);
        for (unsigned lo = 0; lo < sigma; ++lo)
            for (unsigned hi = lo; hi < sigma; ++hi) {
                ++out.cases;
                if (!same_positions(w.range_query(lo, hi), want[lo * sigma + hi], n)) ++out.mismatches;
            }
        ++out.strings;
    }
}

void criterion1() {
    const auto t0 = Clock::now();
    Verdict v;
    const unsigned threads = std::max(1u, std::thread::hardware_concurrency());

    struct Job {
        unsigned n, sigma;
        std::uint64_t begin, end;
    };
    std::vector<Job> jobs;
    constexpr std::uint64_t kSlice = 1 << 16;
    for (unsigned sigma = 1; sigma <= 4; ++sigma)
        for (unsigned n = 1; n <= 12; ++n) {
            std::uint64_t total = 1;
            for (unsigned i = 0; i < n; ++i) total *= sigma;
            for (std::uint64_t b = 0; b < total; b += kSlice) jobs.push_back({n, sigma, b, std::min(total, b + kSlice)});
        }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    ExhaustiveCount total;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            ExhaustiveCount local;
            for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();)
                exhaustive_slice(jobs[j].n, jobs[j].sigma, jobs[j].begin, jobs[j].end, local);
            std::lock_guard lock(mu);
            total.strings += local.strings;
            total.cases += local.cases;
            total.mismatches += local.mismatches;
        });
    for (auto& th : pool) th.join();
    if (total.mismatches) v.fail(std::to_string(total.mismatches) + " exhaustive mismatches");

    // Randomized (string, range) cases: 500 strings, 20 ranges each, both structures.
    std::mt19937_64 rng(101);
    std::uint64_t random_cases = 0, random_mismatch = 0;
    for (int s = 0; s < 500; ++s) {
        const auto n = static_cast<std::size_t>(std::exp(std::uniform_real_distribution<double>(0, std::log(1e5))(rng)));
        const auto sigma = std::uniform_int_distribution<std::uint32_t>(1, 256)(rng);
        const auto x = (s % 2) ? zipf_string(rng, std::max<std::size_t>(n, 1), sigma)
                               : uniform_string(rng, std::max<std::size_t>(n, 1), sigma);
        BlockStore su(config(kBlockBits)), sw(config(kBlockBits));
        auto u = UniformIndex::build(x, sigma, su);
        auto w = WbbIndex::build(x, sigma, sw);
        for (int q = 0; q < 20; ++q) {
            auto a = std::uniform_int_distribution<std::uint32_t>(0, sigma - 1)(rng);
            auto b = std::uniform_int_distribution<std::uint32_t>(0, sigma - 1)(rng);
            if (a > b) std::swap(a, b);
            const auto want = oracle::range(x, a, b);
            ++random_cases;
            if (!same_positions(u.range_query(a, b), want, x.size()) ||
                !same_positions(w.range_query(a, b), want, x.size()))
                ++random_mismatch;
        }
    }
    if (random_mismatch) v.fail(std::to_string(random_mismatch) + " randomized mismatches");
    const double secs = seconds_since(t0);
    if (secs > kRuntimeLimitSeconds) v.fail(fmt("runtime %.0fs over the limit", secs));
    if (v.pass)
        v.detail = std::to_string(total.strings) + " strings, " + std::to_string(total.cases) + " exhaustive + " +
                   std::to_string(random_cases) + " random cases, 0 mismatches, " + std::to_string(threads) + " thread(s)";
    report(1, "exact correctness", v, secs);
}

// ---------------------------------------------------------------------------
// 2. space

void criterion2() {
    const auto t0 = Clock::now();
    Verdict v;
    double lo = 1e300, hi = 0;
    std::mt19937_64 rng(202);
    for (const char* dist : {"uniform", "zipf", "skewed"})
        for (std::size_t n : {1000, 10000, 100000}) {
            const std::string d = dist;
            const std::uint32_t sigma = d == "skewed" ? 2 : 64;
            const auto x = d == "uniform" ? uniform_string(rng, n, sigma)
                           : d == "zipf"  ? zipf_string(rng, n, sigma)
                                          : skewed_string(rng, n);
            BlockStore store(config(kBlockBits));
            const auto idx = WbbIndex::build(x, sigma, store);
            const auto rep = idx.space_report();
            const double nn = static_cast<double>(n);
            const double model = nn * oracle::entropy(x) + nn + sigma * lg(nn) * lg(nn);
            const double c = rep.total_bits / model;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
    if (hi / lo >= kStability) v.fail(fmt("C spread %.2f", hi / lo));
    v.detail += fmt(" C in [%.3f, ", lo) + fmt("%.3f]", hi) + fmt(" spread %.2f", hi / lo);
    report(2, "space bound", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 3. static query I/O

void criterion3() {
    const auto t0 = Clock::now();
    Verdict v;
    std::vector<double> cs;
    double worst = 0;
    const double B = kBlockBits;
    for (std::size_t n : {10000, 100000}) {
        std::mt19937_64 rng(303 + n);
        constexpr std::uint32_t sigma = 4096;
        const auto x = zipf_string(rng, n, sigma);
        BlockStore store(config(kBlockBits));
        auto idx = WbbIndex::build(x, sigma, store);
        const double b = static_cast<double>(store.config().word_block());
        const double nn = static_cast<double>(n);
        Fit fit;
        for (int q = 0; q < 1000; ++q) {
            const auto [lo, hi] = random_range(rng, sigma);
            store.reset_stats();
            const auto res = idx.range_query(lo, hi);
            const double z = static_cast<double>(res.cardinality());
            const double model = (z > 0 ? z * std::log2(nn / z) : 0) / B + std::log(nn) / std::log(b) + lg(lg(nn));
            fit.add(static_cast<double>(store.snapshot().total()), model);
        }
        cs.push_back(fit.c());
        worst = std::max(worst, fit.worst());
    }
    const double spread = *std::max_element(cs.begin(), cs.end()) / *std::min_element(cs.begin(), cs.end());
    if (spread >= kStability) v.fail(fmt("C spread %.2f", spread));
    if (worst > kSingleQueryFactor) v.fail(fmt("a query reached %.2fx the fitted model", worst));
    v.detail += fmt(" C(1e4)=%.3f", cs[0]) + fmt(" C(1e5)=%.3f", cs[1]) + fmt(" spread %.2f", spread) +
                fmt(" worst query %.2fx", worst);
    report(3, "static query I/O", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 4. uniform query I/O

void criterion4() {
    const auto t0 = Clock::now();
    Verdict v;
    std::vector<double> cs;
    double worst = 0;
    std::uint64_t complement_cases = 0;
    const double B = kBlockBits;
    for (std::size_t n : {10000, 100000}) {
        std::mt19937_64 rng(404 + n);
        constexpr std::uint32_t sigma = 4096;
        const auto x = zipf_string(rng, n, sigma);
        BlockStore store(config(kBlockBits));
        auto idx = UniformIndex::build(x, sigma, store);
        const double nn = static_cast<double>(n);
        Fit fit;
        auto run = [&](std::uint32_t lo, std::uint32_t hi) {
            store.reset_stats();
            UniformQueryTrace trace;
            const auto res = idx.range_query(lo, hi, &trace);
            if (trace.used_complement) ++complement_cases;
            const double z = static_cast<double>(res.cardinality());
            const double t = z > 0 ? z * std::log2(nn / z) + z : 0;  // output size in bits
            fit.add(static_cast<double>(store.snapshot().total()), t / B + lg(sigma));
        };
        for (int q = 0; q < 1000; ++q) {
            const auto [lo, hi] = random_range(rng, sigma);
            run(lo, hi);
        }
        // Forced complement path on ranges holding more than half the string.
        idx.set_complement_mode(ComplementMode::kAlways);
        for (int q = 0; q < 200; ++q) {
            const auto lo = std::uniform_int_distribution<std::uint32_t>(0, 3)(rng);
            const auto hi = std::uniform_int_distribution<std::uint32_t>(sigma / 2, sigma - 1)(rng);
            run(lo, hi);
        }
        idx.set_complement_mode(ComplementMode::kAuto);
        cs.push_back(fit.c());
        worst = std::max(worst, fit.worst());
    }
    const double spread = *std::max_element(cs.begin(), cs.end()) / *std::min_element(cs.begin(), cs.end());
    if (spread >= kStability) v.fail(fmt("C spread %.2f", spread));
    if (worst > kSingleQueryFactor) v.fail(fmt("a query reached %.2fx the fitted model", worst));
    if (complement_cases < 400) v.fail("complement path not exercised");
    v.detail += fmt(" C(1e4)=%.3f", cs[0]) + fmt(" C(1e5)=%.3f", cs[1]) + fmt(" spread %.2f", spread) +
                fmt(" worst query %.2fx", worst) + " complement cases " + std::to_string(complement_cases);
    report(4, "uniform query I/O", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 5. approximate queries

void criterion5() {
    const auto t0 = Clock::now();
    Verdict v;

    // (a) no false negatives, from a static index.
    std::uint64_t checks = 0, false_negatives = 0;
    {
        std::mt19937_64 rng(501);
        constexpr std::size_t n = 100000;
        constexpr std::uint32_t sigma = 1024;
        const auto x = zipf_string(rng, n, sigma);
        BlockStore store(config(kBlockBits));
        auto idx = WbbIndex::build(x, sigma, store);
        auto ax = ApproxIndex::build(idx, HashFamily::create(n, 7));
        while (checks < 1000000) {
            const auto [lo, hi] = random_range(rng, sigma);
            const double eps = (checks / 1000) % 2 ? 0.1 : 0.01;
            const auto res = ax.query(lo, hi, eps);
            for (std::uint64_t p : oracle::range(x, lo, hi)) {
                ++checks;
                if (!res.contains(p)) ++false_negatives;
            }
        }
    }
    if (false_negatives) v.fail(std::to_string(false_negatives) + " false negatives");

    // (b) false-positive rate over independent seeds. Each trial draws a hash
    // family, hashes the true set of a random query at the level the index
    // would choose, and tests one random non-member. A share of the trials
    // also builds the full static structure under the same seed and checks
    // that it returns exactly this hashed set.
    std::string fpr_detail;
    {
        std::mt19937_64 rng(502);
        constexpr std::size_t n = 65536;
        constexpr std::uint32_t sigma = 4096;
        const auto x = uniform_string(rng, n, sigma);
        BlockStore base(config(kBlockBits));
        auto idx = WbbIndex::build(x, sigma, base);
        Manifest m;
        idx.describe(m);
        std::vector<std::vector<std::uint64_t>> occ(sigma);
        for (std::size_t i = 0; i < n; ++i) occ[x[i]].push_back(i);
        constexpr std::uint64_t kTrials = 100000;
        constexpr std::uint64_t kIndexEvery = 200;  // trials that rebuild the index
        for (double eps : {0.1, 0.01}) {
            std::uint64_t trials = 0, fp = 0, hashed = 0, index_checked = 0, index_diff = 0;
            for (std::uint64_t t = 0; t < kTrials; ++t) {
                const std::uint64_t seed = 1000003 * t + static_cast<std::uint64_t>(eps * 1000);
                const HashFamily fam = HashFamily::create(n, seed);
                // A range of one to a few characters keeps z/eps inside the hashed levels.
                const auto lo = std::uniform_int_distribution<std::uint32_t>(0, sigma - 4)(rng);
                const auto hi = lo + std::uniform_int_distribution<std::uint32_t>(0, 3)(rng);
                std::vector<std::uint64_t> truth;
                for (std::uint32_t c = lo; c <= hi; ++c) truth.insert(truth.end(), occ[c].begin(), occ[c].end());
                std::sort(truth.begin(), truth.end());
                const auto j = select_level(truth.size(), eps, fam.k());
                std::optional<ApproxResult> res;
                if (j) {
                    std::vector<std::uint64_t> h;
                    for (std::uint64_t p : truth) h.push_back(fam.h(*j, p));
                    std::sort(h.begin(), h.end());
                    h.erase(std::unique(h.begin(), h.end()), h.end());
                    res.emplace(compress_positions(h, HashFamily::universe(*j)), *j, fam);
                    ++hashed;
                } else {
                    res.emplace(compress_positions(truth, n));
                }
                if (t % kIndexEvery == 0) {
                    BlockStore copy = base;
                    auto reopened = WbbIndex::open(copy, m);
                    auto ax = ApproxIndex::build(reopened, fam);
                    const auto got = ax.query(lo, hi, eps);
                    ++index_checked;
                    if (!(got.set() == res->set()) || got.level() != res->level()) ++index_diff;
                }
                std::uint64_t neg;
                do neg = std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
                while (std::binary_search(truth.begin(), truth.end(), neg));
                ++trials;
                if (res->contains(neg)) ++fp;
            }
            const double fpr = static_cast<double>(fp) / trials;
            if (fpr > kFprFactor * eps) v.fail(fmt("FPR %.4f", fpr) + fmt(" at eps %.2f", eps));
            if (index_diff) v.fail(std::to_string(index_diff) + " index results differ from the direct hash");
            if (hashed < trials / 2) v.fail("too few trials on the hashed path");
            fpr_detail += fmt(" FPR(%.2f)=", eps) + fmt("%.5f", fpr) + " (" + std::to_string(fp) + "/" + std::to_string(trials) + ")";
        }
    }

    // (c) set-data bits read.
    std::string bits_detail;
    {
        std::mt19937_64 rng(503);
        constexpr std::size_t n = std::size_t{1} << 20;
        constexpr std::uint32_t sigma = 10000;
        const auto x = uniform_string(rng, n, sigma);
        BlockStore store(config(kBlockBits));
        auto idx = WbbIndex::build(x, sigma, store);
        auto ax = ApproxIndex::build(idx, HashFamily::create(n, 11));
        const double B = kBlockBits;
        for (double eps : {0.1, 0.01}) {
            std::vector<double> cs;
            std::vector<std::pair<double, double>> pts;  // (bits, z lg 1/eps)
            for (std::uint32_t width : {1u, 10u, 100u}) {  // z near 1e2, 1e3, 1e4
                double bits = 0, model = 0;
                for (int q = 0; q < 50; ++q) {
                    const auto lo = std::uniform_int_distribution<std::uint32_t>(0, sigma - width)(rng);
                    ApproxTrace tr;
                    ax.query(lo, lo + width - 1, eps, &tr);
                    const double f = static_cast<double>(tr.z) * std::log2(1 / eps);
                    bits += static_cast<double>(tr.set_bits_read);
                    model += f;
                    pts.emplace_back(static_cast<double>(tr.set_bits_read), f);
                }
                cs.push_back(bits / model);
            }
            const double cmax = *std::max_element(cs.begin(), cs.end());
            const double spread = cmax / *std::min_element(cs.begin(), cs.end());
            if (spread >= kStability) v.fail(fmt("bits-read C spread %.2f", spread) + fmt(" at eps %.2f", eps));
            for (auto [bits, f] : pts)
                if (bits > cmax * f + 2 * B) v.fail("a query read more set bits than the bound");
            bits_detail += fmt(" bits C(%.2f)=", eps) + fmt("[%.2f ", cs[0]) + fmt("%.2f ", cs[1]) + fmt("%.2f]", cs[2]);
        }
    }
    v.detail += std::to_string(checks) + " checks, " + std::to_string(false_negatives) + " FN;" + fpr_detail + ";" +
                bits_detail;
    report(5, "approximate queries", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 6. dynamic differential

struct DynRun {
    std::uint64_t divergences = 0;
    double avg_update_io = 0;
    double model = 0;
    std::uint64_t final_n = 0;
};

std::string make_workload(std::mt19937_64& rng, DynamicVariant variant, std::uint64_t n0, std::uint64_t ops,
                          std::uint32_t sigma) {
    std::string out;
    std::uint64_t size = n0;
    std::uniform_int_distribution<std::uint32_t> ch(0, sigma - 1);
    std::uniform_int_distribution<int> pick(0, 99);
    for (std::uint64_t i = 0; i < ops; ++i) {
        WorkloadOp op;
        const int p = pick(rng);
        const bool full = variant == DynamicVariant::kFullyDynamic;
        if (p < 15) {
            op.kind = OpKind::kQuery;
        } else if (p < 20) {
            op.kind = OpKind::kApproxQuery;
            op.epsilon = p % 2 ? 0.1 : 0.01;
        } else if (!full || p < 50 || size == 0) {
            op.kind = OpKind::kAppend;
        } else if (p < 75) {
            op.kind = OpKind::kChange;
        } else {
            op.kind = OpKind::kDelete;
        }
        if (op.kind == OpKind::kQuery || op.kind == OpKind::kApproxQuery) {
            auto [lo, hi] = random_range(rng, sigma);
            op.lo = lo;
            op.hi = hi;
        } else if (op.kind == OpKind::kAppend) {
            op.ch = ch(rng);
            ++size;
        } else if (op.kind == OpKind::kChange) {
            op.pos = rng() % size;
            op.ch = ch(rng);
        } else {
            op.pos = rng() % size;
            --size;
        }
        out += format_workload_op(op);
        out += '\n';
    }
    return out;
}

DynRun run_dynamic(DynamicVariant variant, std::uint64_t ops, std::uint64_t seed) {
    constexpr std::uint32_t sigma = 64;
    constexpr std::uint64_t n0 = 10000;
    std::mt19937_64 rng(seed);
    const auto x = uniform_string(rng, n0, sigma);
    const auto workload = parse_workload(make_workload(rng, variant, n0, ops, sigma));
    BlockStore store(config(kBlockBits));
    DynamicIndex idx(x, sigma, store, variant, seed);
    oracle::OracleString ref{x};
    DynRun run;
    std::uint64_t updates = 0, update_io = 0;
    for (const auto& op : workload) {
        const std::uint64_t before = store.snapshot().total();
        switch (op.kind) {
            case OpKind::kAppend: idx.append(op.ch); break;
            case OpKind::kChange: idx.change(op.pos, op.ch); break;
            case OpKind::kDelete: idx.erase(op.pos); break;
            case OpKind::kQuery:
                if (!same_positions(idx.range_query(op.lo, op.hi), oracle::range(ref.chars, op.lo, op.hi),
                                    ref.chars.size()))
                    ++run.divergences;
                break;
            case OpKind::kApproxQuery: {
                const auto res = idx.approx_query(op.lo, op.hi, op.epsilon);
                bool ok = res.n() == ref.chars.size();
                for (std::uint64_t p : oracle::range(ref.chars, op.lo, op.hi)) ok = ok && res.contains(p);
                if (!ok) ++run.divergences;
                break;
            }
        }
        if (op.kind == OpKind::kAppend || op.kind == OpKind::kChange || op.kind == OpKind::kDelete) {
            oracle::apply(ref, op);
            ++updates;
            update_io += store.snapshot().total() - before;
        }
    }
    idx.check_invariants();
    if (idx.peek_string() != ref.chars) ++run.divergences;
    run.final_n = ref.chars.size();
    run.avg_update_io = static_cast<double>(update_io) / std::max<std::uint64_t>(updates, 1);
    const double n = static_cast<double>(run.final_n);
    const double b = static_cast<double>(store.config().word_block());
    switch (variant) {
        case DynamicVariant::kDirectAppend: run.model = lg(lg(n)); break;
        case DynamicVariant::kBufferedAppend: run.model = lg(n) / b; break;
        case DynamicVariant::kFullyDynamic: run.model = lg(n) * lg(lg(n)) / b; break;
    }
    return run;
}

void criterion6() {
    const auto t0 = Clock::now();
    Verdict v;
    for (auto variant : {DynamicVariant::kDirectAppend, DynamicVariant::kBufferedAppend, DynamicVariant::kFullyDynamic}) {
        const DynRun small = run_dynamic(variant, 10000, 61);
        const DynRun large = run_dynamic(variant, 100000, 62);
        const double c1 = small.avg_update_io / small.model, c2 = large.avg_update_io / large.model;
        const double spread = std::max(c1, c2) / std::min(c1, c2);
        const std::string name = variant_name(variant);
        if (small.divergences + large.divergences)
            v.fail(name + ": " + std::to_string(small.divergences + large.divergences) + " divergences");
        if (!(spread < kStability)) v.fail(name + fmt(" C spread %.2f", spread));
        v.detail += " " + name + fmt(" io/op %.2f", small.avg_update_io) + fmt("/%.2f", large.avg_update_io) +
                    fmt(" C %.2f", c1) + fmt("/%.2f", c2);
    }
    report(6, "dynamic differential", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 7. buffered bitmap index

// Runs `ops` random updates over 1024 ids; returns the point-query fit, or
// checks buffer conservation every 1000 operations when `drain_checks`.
Fit bbi_run(std::uint64_t ops, std::uint64_t seed, bool drain_checks, Verdict& v) {
    constexpr std::uint64_t kIds = 1024;
    constexpr unsigned kPosBits = 24;
    std::mt19937_64 rng(seed);
    BlockStore store(config(kBlockBits));
    BlockPool pool(store);
    BufferedBitmapIndex bbi(pool, bit_width_for(kIds), kPosBits, false);
    std::vector<std::set<std::uint64_t>> mirror(kIds);
    std::uint64_t total = 0;
    auto check_against_mirror = [&](const std::vector<BbiSegment>& got) {
        std::size_t at = 0;
        for (std::uint64_t id = 0; id < kIds; ++id) {
            if (mirror[id].empty()) continue;
            if (at >= got.size() || got[at].id != id ||
                !std::equal(got[at].positions.begin(), got[at].positions.end(), mirror[id].begin(), mirror[id].end()))
                return false;
            ++at;
        }
        return at == got.size();
    };
    for (std::uint64_t i = 1; i <= ops; ++i) {
        const std::uint64_t id = rng() % kIds;
        auto& m = mirror[id];
        if (!m.empty() && rng() % 5 == 0) {
            auto it = m.begin();
            std::advance(it, static_cast<long>(rng() % m.size()));
            bbi.update(id, *it, false);
            m.erase(it);
            --total;
        } else {
            std::uint64_t p;
            do p = rng() % (std::uint64_t{1} << kPosBits);
            while (m.count(p));
            bbi.update(id, p, true);
            m.insert(p);
            ++total;
        }
        if (drain_checks && i % 1000 == 0) {
            const bool before = check_against_mirror(bbi.logical());
            bbi.drain();
            const bool after = bbi.pending() == 0 && check_against_mirror(bbi.stored());
            bbi.check();
            if (!before || !after) v.fail("buffer conservation broken after " + std::to_string(i) + " operations");
        }
    }
    Fit fit;
    if (drain_checks) return fit;
    const double B = kBlockBits;
    for (int q = 0; q < 1000; ++q) {
        const std::uint64_t id = rng() % kIds;
        store.reset_stats();
        const auto bm = bbi.point_query(id, std::uint64_t{1} << kPosBits);
        const double io = static_cast<double>(store.snapshot().total());
        const auto got = decompress(bm);
        if (!std::equal(mirror[id].begin(), mirror[id].end(), got.begin(), got.end()))
            v.fail("point query disagrees with the mirror");
        fit.add(io, static_cast<double>(size_bits(bm)) / B + lg(static_cast<double>(total)));
    }
    return fit;
}

void criterion7() {
    const auto t0 = Clock::now();
    Verdict v;
    const Fit small = bbi_run(10000, 71, false, v);
    const Fit large = bbi_run(100000, 72, false, v);
    bbi_run(100000, 73, true, v);
    const double spread = std::max(small.c(), large.c()) / std::min(small.c(), large.c());
    const double worst = std::max(small.worst(), large.worst());
    if (spread >= kStability) v.fail(fmt("C spread %.2f", spread));
    if (worst > kSingleQueryFactor) v.fail(fmt("a query reached %.2fx the fitted model", worst));
    v.detail += fmt(" C(1e4)=%.3f", small.c()) + fmt(" C(1e5)=%.3f", large.c()) + fmt(" spread %.2f", spread) +
                fmt(" worst %.2fx", worst) + ", drain checks every 1000 ops";
    report(7, "buffered bitmap index", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 8. codec

void criterion8() {
    const auto t0 = Clock::now();
    Verdict v;
    constexpr std::uint64_t kMax = std::uint64_t{1} << 20;
    Bitstream s;
    for (std::uint64_t x = 1; x <= kMax; ++x) append_gamma(s, x);
    BitReader r(s);
    for (std::uint64_t x = 1; x <= kMax; ++x)
        if (r.read_gamma() != x) {
            v.fail("gamma roundtrip failed at " + std::to_string(x));
            break;
        }
    if (!r.at_end()) v.fail("gamma stream has trailing bits");

    std::mt19937_64 rng(808);
    double tightest = 0;
    for (int t = 0; t < 10000; ++t) {
        const std::uint64_t n = 1 + rng() % 100000;
        // Density log-uniform in [1/n, 1].
        const double density = std::exp(-std::uniform_real_distribution<double>(0, std::log(static_cast<double>(n)))(rng));
        std::bernoulli_distribution keep(density);
        std::vector<std::uint64_t> pos;
        for (std::uint64_t i = 0; i < n; ++i)
            if (keep(rng)) pos.push_back(i);
        const std::uint64_t z = pos.size();
        const auto bm = compress_positions(pos, n);
        const double zz = static_cast<double>(z);
        const double bound = z ? 2 * zz * std::log2(static_cast<double>(n) / zz + 1) + 4 * zz + 64 : 64;
        const double size = static_cast<double>(size_bits(bm));
        tightest = std::max(tightest, size / bound);
        if (size > bound) v.fail("compressed size over the bound");
        if (decompress(bm) != pos) v.fail("random set does not roundtrip");
    }
    v.detail += "gamma exhaustive to 2^20, 10000 sets, max size/bound " + fmt("%.3f", tightest);
    report(8, "codec properties", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// 9. deletion translation

void criterion9() {
    const auto t0 = Clock::now();
    Verdict v;
    std::mt19937_64 rng(909);
    std::uint64_t checked = 0;
    for (int seq = 0; seq < 1000; ++seq) {
        const std::uint64_t n = 1 + rng() % 3000;
        BlockStore store(config(1024));
        BlockPool pool(store);
        DeletionTree tree(pool);
        std::vector<std::uint64_t> live(n);
        std::iota(live.begin(), live.end(), 0);
        const std::uint64_t dels = rng() % n;
        for (std::uint64_t d = 0; d < dels; ++d) {
            const std::uint64_t cur = rng() % live.size();
            const std::uint64_t orig = tree.to_original(cur);
            if (orig != live[cur]) {
                v.fail("to_original disagrees with the live list");
                break;
            }
            tree.insert(orig);
            live.erase(live.begin() + static_cast<long>(cur));
        }
        for (std::uint64_t c = 0; c < live.size(); ++c) {
            ++checked;
            if (tree.to_original(c) != live[c] || tree.to_current(live[c]) != c) {
                v.fail("translation roundtrip failed");
                break;
            }
        }
    }

    std::vector<double> cs;
    double worst = 0;
    for (std::uint64_t n : {10000, 100000}) {
        BlockStore store(config(1024));
        BlockPool pool(store);
        DeletionTree tree(pool);
        std::uint64_t size = n;
        for (std::uint64_t d = 0; d < n / 2; ++d) {
            tree.insert(tree.to_original(rng() % size));
            --size;
        }
        const double b = static_cast<double>(store.config().word_block());
        const double model = std::log(static_cast<double>(n)) / std::log(b);
        Fit fit;
        for (int q = 0; q < 1000; ++q) {
            const std::uint64_t c = rng() % size;
            store.reset_stats();
            const std::uint64_t o = tree.to_original(c);
            fit.add(static_cast<double>(store.snapshot().total()), model);
            store.reset_stats();
            if (tree.to_current(o) != c) v.fail("translation roundtrip failed");
            fit.add(static_cast<double>(store.snapshot().total()), model);
        }
        cs.push_back(fit.c());
        worst = std::max(worst, fit.worst());
    }
    const double spread = std::max(cs[0], cs[1]) / std::min(cs[0], cs[1]);
    if (spread >= kStability) v.fail(fmt("C spread %.2f", spread));
    if (worst > kSingleQueryFactor) v.fail(fmt("a translation reached %.2fx the fitted model", worst));
    v.detail += std::to_string(checked) + " live positions, " + fmt("C(1e4)=%.3f", cs[0]) + fmt(" C(1e5)=%.3f", cs[1]) +
                fmt(" spread %.2f", spread) + fmt(" worst %.2fx", worst);
    report(9, "deletion translation", v, seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<void()>> all = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                    criterion6, criterion7, criterion8, criterion9};
    // Optional arguments pick criteria by number.
    std::vector<int> pick;
    for (int i = 1; i < argc; ++i) pick.push_back(std::atoi(argv[i]));
    if (pick.empty())
        for (int i = 1; i <= 9; ++i) pick.push_back(i);

    for (int k : pick) {
        if (k < 1 || k > 9) {
            std::fprintf(stderr, "unknown criterion %d\n", k);
            return 2;
        }
        try {
            all[k - 1]();
        } catch (const std::exception& e) {
            std::printf("criterion %d FAIL  exception: %s\n", k, e.what());
            ++g_failed;
        }
    }
    return g_failed ? 1 : 0;
}
