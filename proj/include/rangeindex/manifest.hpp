#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rix {

// Flat key=value text file describing a persisted index.
class Manifest {
public:
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void set_u64(const std::string& key, std::uint64_t value) { kv_[key] = std::to_string(value); }
    void set_list(const std::string& key, const std::vector<std::uint64_t>& values);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::vector<std::uint64_t> get_list(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const noexcept { return kv_; }

    std::string to_string() const;
    static Manifest parse(const std::string& text);
    void save(const std::string& path) const;
    static Manifest load(const std::string& path);

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace rix
