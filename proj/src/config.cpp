#include "dsal/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dsal/common.hpp"

namespace dsal {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(lineno) +
                            ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw DataError("config line " + std::to_string(lineno) + ": empty key");
        cfg.set(key, value);
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config: " + path);
    std::ostringstream all;
    all << f.rdbuf();
    return parse_string(all.str());
}

const std::string* KeyValueConfig::find(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

bool KeyValueConfig::has(const std::string& key) const { return find(key) != nullptr; }

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
        if (k == key) {
            v = value;
            return;
        }
    entries_.emplace_back(key, value);
}

std::string KeyValueConfig::get_string(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw DataError("config key missing: " + key);
    return *v;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

long KeyValueConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const long out = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw DataError("config key '" + key + "' is not an integer: '" + v + "'");
    return out;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double KeyValueConfig::get_real(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw DataError("config key '" + key + "' is not a number: '" + v + "'");
    return out;
}

double KeyValueConfig::get_real(const std::string& key, double fallback) const {
    return has(key) ? get_real(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw DataError("config key '" + key + "' is not a boolean: '" + v + "'");
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

void KeyValueConfig::require_known(const std::vector<std::string>& allowed) const {
    std::string offenders;
    for (const auto& [k, v] : entries_)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            offenders += offenders.empty() ? k : ", " + k;
    if (!offenders.empty()) throw DataError("unknown config keys: " + offenders);
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write manifest: " + path);
    for (const auto& [k, v] : entries) f << k << " = " << v << "\n";
    if (!f) throw DataError("manifest write failed: " + path);
}

}  // namespace dsal
