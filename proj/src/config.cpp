#include "dcdm/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dcdm/rng.hpp"

namespace dcdm {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("config line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty section name");
            cfg.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    return sit != sections_.end() && sit->second.count(key) > 0;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    if (sit == sections_.end() || !sit->second.count(key))
        throw std::invalid_argument("config: missing [" + section + "] " + key);
    return sit->second.at(key);
}

std::string Config::get_or(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

std::int64_t Config::get_int(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    std::size_t pos = 0;
    const std::int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("config: [" + section + "] " + key + " is not an integer: '" + v + "'");
    return out;
}

std::int64_t Config::get_int_or(const std::string& section, const std::string& key, std::int64_t fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

double Config::get_real(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("config: [" + section + "] " + key + " is not a number: '" + v + "'");
    return out;
}

double Config::get_real_or(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_real(section, key) : fallback;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

std::uint64_t Config::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [section, kv] : sections_) {  // std::map iterates sorted
        h = fnv1a64(section.data(), section.size(), h);
        for (const auto& [k, v] : kv) {
            h = fnv1a64(k.data(), k.size(), h);
            h = fnv1a64(v.data(), v.size(), h);
        }
    }
    return h;
}

std::string Config::to_string() const {
    std::ostringstream out;
    for (const auto& [section, kv] : sections_) {
        out << "[" << section << "]\n";
        for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
        out << "\n";
    }
    return out.str();
}

}  // namespace dcdm
