#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dcdm {

/// Run configuration: "key = value" lines grouped under [section] headers.
/// '#' and ';' start comments. One file drives every pipeline stage.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key) const;
    std::int64_t get_int_or(const std::string& section, const std::string& key, std::int64_t fallback) const;
    double get_real(const std::string& section, const std::string& key) const;
    double get_real_or(const std::string& section, const std::string& key, double fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

    /// Hash of the canonicalized (sorted) section/key/value triples.
    std::uint64_t content_hash() const;

    std::string to_string() const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace dcdm
