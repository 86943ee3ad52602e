#include "boxseg/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>

#include "boxseg/scene.hpp"

namespace boxseg {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    }
    return true;
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in) {
    ConfigFile cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        const std::string where = "config line " + std::to_string(lineno) + ": ";
        if (s.front() == '[') {
            if (s.back() != ']') throw ParseError(where + "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!valid_name(section)) throw ParseError(where + "bad section name '" + section + "'");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError(where + "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!valid_name(key)) throw ParseError(where + "bad key '" + key + "'");
        if (value.empty()) throw ParseError(where + "missing value for '" + key + "'");
        if (section.empty()) throw ParseError(where + "key '" + key + "' outside a section");
        cfg.values_[section + "." + key] = unquote(value);
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    return parse(in);
}

void ConfigFile::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error("override '" + assignment + "' is not section.key=value");
    const std::string key = trim(assignment.substr(0, eq));
    if (key.find('.') == std::string::npos) throw Error("override key '" + key + "' needs a section");
    values_[key] = unquote(trim(assignment.substr(eq + 1)));
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end) throw Error("config key " + key + ": '" + value + "' is not a number");
    return v;
}

long long to_integer(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, v);
    if (ec != std::errc() || ptr != end) throw Error("config key " + key + ": '" + value + "' is not an integer");
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw Error("config key " + key + ": '" + value + "' is not a boolean");
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') throw Error("config key " + key + ": expected [a, b, ...]");
    v = v.substr(1, v.size() - 2);
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const std::string item = trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!item.empty()) out.push_back(static_cast<int>(to_integer(key, item)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace boxseg
