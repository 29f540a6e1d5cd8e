#include "rangeindex/manifest.hpp"

#include <fstream>
#include <sstream>

#include "rangeindex/errors.hpp"

namespace rix {

void Manifest::set_list(const std::string& key, const std::vector<std::uint64_t>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s.push_back(',');
        s += std::to_string(values[i]);
    }
    kv_[key] = s;
}

const std::string& Manifest::get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) fail(ErrorCode::kCorruptStream, "manifest missing key '" + key + "'");
    return it->second;
}

std::uint64_t Manifest::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const std::uint64_t x = std::stoull(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::kCorruptStream, "manifest key '" + key + "' is not an integer");
}

std::vector<std::uint64_t> Manifest::get_list(const std::string& key) const {
    std::vector<std::uint64_t> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            fail(ErrorCode::kCorruptStream, "manifest list '" + key + "' is malformed");
        }
    }
    return out;
}

std::string Manifest::to_string() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
    return out;
}

Manifest Manifest::parse(const std::string& text) {
    Manifest m;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::kCorruptStream, "manifest line without '='");
        m.kv_[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
}

void Manifest::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    require(static_cast<bool>(os), ErrorCode::kIo, "cannot write manifest");
    os << to_string();
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::kIo, "cannot read manifest");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

}  // namespace rix
