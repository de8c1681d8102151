#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mvsde/errors.hpp"

namespace mvsde {

// One scalar or flat array out of a config file or a --set override.
struct ConfigValue {
    enum class Type { integer, real, boolean, string, array };
    Type type = Type::integer;
    std::int64_t i = 0;
    double r = 0.0;
    bool b = false;
    std::string s;
    std::vector<ConfigValue> arr;

    static ConfigValue of_int(std::int64_t v) { ConfigValue c; c.type = Type::integer; c.i = v; return c; }
    static ConfigValue of_real(double v) { ConfigValue c; c.type = Type::real; c.r = v; return c; }
    static ConfigValue of_bool(bool v) { ConfigValue c; c.type = Type::boolean; c.b = v; return c; }
    static ConfigValue of_string(std::string v) { ConfigValue c; c.type = Type::string; c.s = std::move(v); return c; }

    double as_real(const std::string& key) const {
        if (type == Type::real) return r;
        if (type == Type::integer) return static_cast<double>(i);
        throw ConfigError("config key '" + key + "' is not a number");
    }
    std::int64_t as_int(const std::string& key) const {
        if (type == Type::integer) return i;
        throw ConfigError("config key '" + key + "' is not an integer");
    }
    bool as_bool(const std::string& key) const {
        if (type == Type::boolean) return b;
        throw ConfigError("config key '" + key + "' is not a boolean");
    }
    const std::string& as_string(const std::string& key) const {
        if (type == Type::string) return s;
        throw ConfigError("config key '" + key + "' is not a string");
    }
};

// Flat dotted-key table ([section] headers become "section." prefixes).
class ParamTable {
public:
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }
    void erase(const std::string& key) { values_.erase(key); }

    const ConfigValue& raw(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
        return it->second;
    }

    double get_real(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second.as_real(key);
    }
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second.as_int(key);
    }
    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second.as_bool(key);
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second.as_string(key);
    }

    double require_real(const std::string& key) const { return raw(key).as_real(key); }
    std::int64_t require_int(const std::string& key) const { return raw(key).as_int(key); }
    std::string require_string(const std::string& key) const { return raw(key).as_string(key); }

    std::vector<double> get_real_array(const std::string& key) const {
        const ConfigValue& v = raw(key);
        if (v.type != ConfigValue::Type::array)
            throw ConfigError("config key '" + key + "' is not an array");
        std::vector<double> out;
        out.reserve(v.arr.size());
        for (const auto& e : v.arr) out.push_back(e.as_real(key));
        return out;
    }
    std::vector<std::int64_t> get_int_array(const std::string& key) const {
        const ConfigValue& v = raw(key);
        if (v.type != ConfigValue::Type::array)
            throw ConfigError("config key '" + key + "' is not an array");
        std::vector<std::int64_t> out;
        out.reserve(v.arr.size());
        for (const auto& e : v.arr) out.push_back(e.as_int(key));
        return out;
    }
    std::vector<std::string> get_string_array(const std::string& key) const {
        const ConfigValue& v = raw(key);
        if (v.type != ConfigValue::Type::array)
            throw ConfigError("config key '" + key + "' is not an array");
        std::vector<std::string> out;
        out.reserve(v.arr.size());
        for (const auto& e : v.arr) out.push_back(e.as_string(key));
        return out;
    }

    // other's entries win on conflicts.
    void merge(const ParamTable& other) {
        for (const auto& [k, v] : other.values_) values_[k] = v;
    }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        out.reserve(values_.size());
        for (const auto& [k, v] : values_) out.push_back(k);
        return out;
    }

    // All keys under "prefix." with the prefix stripped.
    ParamTable section(const std::string& prefix) const {
        ParamTable out;
        const std::string p = prefix + ".";
        for (const auto& [k, v] : values_)
            if (k.rfind(p, 0) == 0) out.values_[k.substr(p.size())] = v;
        return out;
    }

private:
    std::map<std::string, ConfigValue> values_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline ConfigValue parse_scalar(const std::string& text, int line_no);

inline ConfigValue parse_value(const std::string& text, int line_no) {
    const std::string v = trim(text);
    if (v.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
    if (v.front() == '[') {
        if (v.back() != ']')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
        ConfigValue out;
        out.type = ConfigValue::Type::array;
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        bool in_string = false;
        for (char ch : inner) {
            if (ch == '"') in_string = !in_string;
            if (ch == ',' && !in_string) {
                if (!trim(item).empty()) out.arr.push_back(parse_scalar(item, line_no));
                item.clear();
            } else {
                item.push_back(ch);
            }
        }
        if (!trim(item).empty()) out.arr.push_back(parse_scalar(item, line_no));
        return out;
    }
    return parse_scalar(v, line_no);
}

inline ConfigValue parse_scalar(const std::string& text, int line_no) {
    const std::string v = trim(text);
    if (v.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
        return ConfigValue::of_string(v.substr(1, v.size() - 2));
    }
    if (v == "true") return ConfigValue::of_bool(true);
    if (v == "false") return ConfigValue::of_bool(false);
    // Integer if it parses completely as one and carries no real-number marks.
    if (v.find_first_of(".eE") == std::string::npos ||
        (v.size() > 2 && (v[0] == '0') && (v[1] == 'x'))) {
        try {
            std::size_t used = 0;
            const long long i = std::stoll(v, &used, 0);
            if (used == v.size()) return ConfigValue::of_int(i);
        } catch (...) {
        }
    }
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return ConfigValue::of_real(d);
    } catch (...) {
    }
    throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
}

}  // namespace detail

// Structured key-value text: comments (#), [section] headers, key = value
// lines with string/bool/integer/real/array values.
inline ParamTable parse_config_text(const std::string& text) {
    ParamTable table;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Strip comments outside strings.
        bool in_string = false;
        for (std::size_t p = 0; p < line.size(); ++p) {
            if (line[p] == '"') in_string = !in_string;
            if (line[p] == '#' && !in_string) {
                line = line.substr(0, p);
                break;
            }
        }
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
            section = detail::trim(t.substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        table.set(key, detail::parse_value(t.substr(eq + 1), line_no));
    }
    return table;
}

inline ParamTable load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// A single "key=value" override from the command line.
inline void apply_override(ParamTable& table, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    table.set(detail::trim(assignment.substr(0, eq)),
              detail::parse_value(assignment.substr(eq + 1), 0));
}

}  // namespace mvsde
