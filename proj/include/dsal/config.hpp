#ifndef DSAL_CONFIG_HPP
#define DSAL_CONFIG_HPP

#include <string>
#include <utility>
#include <vector>

namespace dsal {

// One key per line, `key = value`, '#' starts a comment, blank lines ignored.
// Keys keep first-seen order; later assignments overwrite in place.
class KeyValueConfig {
public:
    static KeyValueConfig parse_string(const std::string& text);
    static KeyValueConfig parse_file(const std::string& path);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    // typed getters; the two-argument forms return the fallback when absent.
    // Malformed values raise DataError naming the key.
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    double get_real(const std::string& key) const;
    double get_real(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;  // true/false/1/0/yes/no/on/off
    bool get_bool(const std::string& key, bool fallback) const;

    // every key must be in the allowed list; otherwise DataError names the
    // offenders so typos never pass silently
    void require_known(const std::vector<std::string>& allowed) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    const std::string* find(const std::string& key) const;
    std::vector<std::pair<std::string, std::string>> entries_;
};

// resolved-run echo: ordered key=value lines, written atomically enough for a
// single process (truncate + write)
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace dsal

#endif
