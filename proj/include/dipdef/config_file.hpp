#ifndef DIPDEF_CONFIG_FILE_HPP
#define DIPDEF_CONFIG_FILE_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dipdef/errors.hpp"

namespace dipdef {

// Flat key=value configuration with optional [section] headers. Keys inside a
// section are addressed as "section.key". '#' starts a comment.
class KeyValueConfig {
  public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig cfg;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
                section = trim(t.substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
            std::string key = trim(t.substr(0, eq));
            if (!section.empty()) key = section + "." + key;
            cfg.values_[key] = trim(t.substr(eq + 1));
        }
        return cfg;
    }

    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        return parse(in);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_real(const std::string& key, double fallback) const {
        return has(key) ? to_real(key, get(key)) : fallback;
    }
    long get_int(const std::string& key, long fallback) const {
        return has(key) ? to_int(key, get(key)) : fallback;
    }
    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = get(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key " + key + ": not a boolean: " + v);
    }

    // Comma-separated integer list, e.g. "32,32,32".
    std::vector<int> get_int_list(const std::string& key) const {
        std::vector<int> out;
        std::stringstream ss(get(key));
        std::string item;
        while (std::getline(ss, item, ','))
            out.push_back(static_cast<int>(to_int(key, trim(item))));
        return out;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static double to_real(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not a number: " + v);
        }
    }
    static long to_int(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const long r = std::stol(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not an integer: " + v);
        }
    }

    std::map<std::string, std::string> values_;
};

}  // namespace dipdef

#endif
