#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace riftort {

// Config parse/validation failure carrying a file position.  what() already
// contains "origin:line:column: message".
class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& origin, int line, int column, const std::string& message);
    int line() const { return line_; }
    int column() const { return column_; }

  private:
    int line_;
    int column_;
};

// Line-oriented `key = value` file with `[section]` headers and '#' comments.
// Keys are unique per section; values keep internal spaces.  Typed getters
// re-raise with the position of the offending entry.
class ConfigFile {
  public:
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
        int line = 0;
    };

    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& origin);

    const std::string& origin() const { return origin_; }
    const std::vector<Entry>& entries() const { return entries_; }

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    // typo guard: every present entry must appear in `allowed` ("section.key")
    void require_known_keys(const std::vector<std::string>& allowed) const;

    [[noreturn]] void fail_at(const std::string& section, const std::string& key,
                              const std::string& message) const;

  private:
    const Entry* find(const std::string& section, const std::string& key) const;

    std::string origin_;
    std::vector<Entry> entries_;
};

}  // namespace riftort
