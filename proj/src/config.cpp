#include "riftort/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace riftort {

namespace {

std::string position_message(const std::string& origin, int line, int column,
                             const std::string& message) {
    std::ostringstream os;
    os << origin << ':' << line << ':' << column << ": " << message;
    return os.str();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

ConfigError::ConfigError(const std::string& origin, int line, int column,
                         const std::string& message)
    : std::runtime_error(position_message(origin, line, column, message)),
      line_(line),
      column_(column) {}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError(path, 0, 0, "cannot open file");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_string(buf.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile cf;
    cf.origin_ = origin;
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        // strip comments outside of values: '#' starts a comment anywhere
        const auto hash = raw.find('#');
        std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;

        const int col = static_cast<int>(line.find_first_not_of(" \t\r")) + 1;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError(origin, lineno, static_cast<int>(line.size()),
                                  "section header missing closing ']'");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty())
                throw ConfigError(origin, lineno, col, "empty section name");
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin, lineno, col, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin, lineno, col, "empty key");
        if (section.empty())
            throw ConfigError(origin, lineno, col, "entry before any [section] header");
        for (const Entry& e : cf.entries_)
            if (e.section == section && e.key == key)
                throw ConfigError(origin, lineno, col,
                                  "duplicate key '" + key + "' in [" + section + "] (first at line " +
                                      std::to_string(e.line) + ")");
        cf.entries_.push_back({section, key, value, lineno});
    }
    return cf;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
    for (const Entry& e : entries_)
        if (e.section == section && e.key == key) return &e;
    return nullptr;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::string ConfigFile::get(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e)
        throw ConfigError(origin_, 0, 0, "missing required key '" + section + "." + key + "'");
    return e->value;
}

std::string ConfigFile::get_or(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(e->value, &used);
    } catch (const std::exception&) {
        throw ConfigError(origin_, e->line, 1, "cannot parse number '" + e->value + "'");
    }
    if (used != e->value.size())
        throw ConfigError(origin_, e->line, 1, "trailing characters in number '" + e->value + "'");
    return v;
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
        std::size_t used = 0;
        const int v = std::stoi(e->value, &used);
        if (used != e->value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_, e->line, 1, "cannot parse integer '" + e->value + "'");
    }
}

std::uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(e->value, &used);
        if (used != e->value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_, e->line, 1, "cannot parse unsigned integer '" + e->value + "'");
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const Entry* e = find(section, key);
    if (!e) return fallback;
    std::string v = e->value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(origin_, e->line, 1, "cannot parse boolean '" + e->value + "'");
}

void ConfigFile::require_known_keys(const std::vector<std::string>& allowed) const {
    for (const Entry& e : entries_) {
        const std::string qualified = e.section + "." + e.key;
        if (std::find(allowed.begin(), allowed.end(), qualified) == allowed.end())
            throw ConfigError(origin_, e.line, 1, "unknown key '" + qualified + "'");
    }
}

void ConfigFile::fail_at(const std::string& section, const std::string& key,
                         const std::string& message) const {
    const Entry* e = find(section, key);
    throw ConfigError(origin_, e ? e->line : 0, 1, message);
}

}  // namespace riftort
