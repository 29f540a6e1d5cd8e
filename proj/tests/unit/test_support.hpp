#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace rix::testing {

// Reference gamma encoder built from the textual definition: the binary
// representation of v, preceded by one zero per bit after the leading one.
inline std::string reference_gamma(std::uint64_t v) {
    std::string bin;
    for (std::uint64_t t = v; t > 0; t >>= 1) bin.push_back(static_cast<char>('0' + (t & 1)));
    std::reverse(bin.begin(), bin.end());
    return std::string(bin.size() - 1, '0') + bin;
}

inline std::vector<std::uint64_t> random_subset(std::mt19937_64& rng, std::uint64_t n, double density) {
    std::bernoulli_distribution keep(density);
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < n; ++i)
        if (keep(rng)) out.push_back(i);
    return out;
}

inline std::vector<std::uint32_t> random_string(std::mt19937_64& rng, std::size_t n, std::uint32_t sigma) {
    std::uniform_int_distribution<std::uint32_t> d(0, sigma - 1);
    std::vector<std::uint32_t> s(n);
    for (auto& c : s) c = d(rng);
    return s;
}

// Zipf(s) over [0, sigma) via inverse CDF.
inline std::vector<std::uint32_t> zipf_string(std::mt19937_64& rng, std::size_t n, std::uint32_t sigma, double s = 1.0) {
    std::vector<double> cdf(sigma);
    double acc = 0;
    for (std::uint32_t k = 0; k < sigma; ++k) {
        acc += 1.0 / std::pow(static_cast<double>(k + 1), s);
        cdf[k] = acc;
    }
    std::uniform_real_distribution<double> u(0, acc);
    std::vector<std::uint32_t> out(n);
    for (auto& c : out) {
        const double r = u(rng);
        c = static_cast<std::uint32_t>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        if (c >= sigma) c = sigma - 1;
    }
    return out;
}

inline std::vector<std::uint64_t> brute_range(const std::vector<std::uint32_t>& s, std::uint32_t lo, std::uint32_t hi) {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] >= lo && s[i] <= hi) out.push_back(i);
    return out;
}

}  // namespace rix::testing
