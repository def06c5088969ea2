#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace intrakd {

/// Flat `dotted.key = value` settings. '#' starts a comment; blank lines are
/// ignored; later assignments override earlier ones.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& source = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated unsigned integers.
    std::vector<std::uint64_t> get_u64_list(const std::string& key, const std::vector<std::uint64_t>& fallback) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    std::string to_text() const;

private:
    std::map<std::string, std::string> entries_;
};

std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& text);

}  // namespace intrakd
