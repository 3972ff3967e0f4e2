#pragma once

// Line-oriented `key = value` records. A file is a sequence of blocks; a
// block starts at a `[tag]` line or after one or more blank lines. `#` starts
// a comment line.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radmat/error.hpp"

namespace radmat {

inline std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s == "inf" || s == "+inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

class KvRecord {
public:
    KvRecord() = default;
    explicit KvRecord(std::string tag) : tag_(std::move(tag)) {}

    const std::string& tag() const { return tag_; }
    void set_tag(std::string tag) { tag_ = std::move(tag); }

    void set(std::string key, std::string value) {
        for (auto& [k, v] : entries_) {
            if (k == key) {
                v = std::move(value);
                return;
            }
        }
        entries_.emplace_back(std::move(key), std::move(value));
    }
    void set(std::string key, double value) { set(std::move(key), format_double(value)); }
    void set(std::string key, const char* value) { set(std::move(key), std::string(value)); }

    bool has(std::string_view key) const { return find(key) != nullptr; }
    bool empty() const { return entries_.empty(); }
    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    const std::string* find(std::string_view key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return &v;
        return nullptr;
    }

    const std::string& get(std::string_view key) const {
        if (auto* v = find(key)) return *v;
        throw Error(ErrorKind::Format, "missing field '" + std::string(key) + "'");
    }

    std::string get_or(std::string_view key, std::string fallback) const {
        if (auto* v = find(key)) return *v;
        return fallback;
    }

    double get_double(std::string_view key) const {
        auto v = parse_double(get(key));
        if (!v) throw Error(ErrorKind::Format, "field '" + std::string(key) + "' is not a number");
        return *v;
    }

    double get_double_or(std::string_view key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long long get_int(std::string_view key) const {
        const auto s = trim(get(key));
        long long v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw Error(ErrorKind::Format, "field '" + std::string(key) + "' is not an integer");
        return v;
    }

    bool get_bool(std::string_view key) const {
        const auto s = trim(get(key));
        if (s == "1" || s == "true" || s == "yes") return true;
        if (s == "0" || s == "false" || s == "no") return false;
        throw Error(ErrorKind::Format, "field '" + std::string(key) + "' is not a boolean");
    }

    std::string to_string() const {
        std::string out;
        if (!tag_.empty()) out += "[" + tag_ + "]\n";
        for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
        return out;
    }

private:
    std::string tag_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::vector<KvRecord> parse_kv_blocks(std::string_view text) {
    std::vector<KvRecord> blocks;
    KvRecord current;
    bool open = false;
    auto flush = [&] {
        if (open && (!current.empty() || !current.tag().empty())) blocks.push_back(std::move(current));
        current = KvRecord();
        open = false;
    };
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) {
            if (!current.empty()) flush();
            continue;
        }
        if (line.front() == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            flush();
            current.set_tag(std::string(trim(line.substr(1, line.size() - 2))));
            open = true;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": expected 'key = value'");
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(ErrorKind::Format, "line " + std::to_string(line_no) + ": empty key");
        current.set(std::string(key), std::string(trim(line.substr(eq + 1))));
        open = true;
    }
    flush();
    return blocks;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

} // namespace radmat
