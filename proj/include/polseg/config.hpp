#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace polseg {

/// Flat `section.key -> value` store read from INI/TOML-style files:
///
///   [diffusion]
///   steps = 1000
///   eta = 0.0
///
/// Keys outside a section are taken as written. Later layers override
/// earlier ones (defaults < file < command-line flags).
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<string>");
    static Config from_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    /// Accepts `key=value`.
    void set_assignment(const std::string& assignment);
    void merge(const Config& overrides);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    /// Sorted `key = value` lines.
    std::string dump() const;
    /// FNV-1a over dump(), hex.
    std::string hash() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace polseg
