#include "spike/config.hpp"

#include "spike/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>

namespace spike {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

}  // namespace

TomlConfig TomlConfig::parse(const std::string& text) {
    TomlConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("config line " + std::to_string(line_no) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string raw = trim(line.substr(eq + 1));
        if (key.empty() || raw.empty())
            throw ParseError("config line " + std::to_string(line_no) + ": empty key or value");
        std::string full_key = section.empty() ? key : section + "." + key;

        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"')
                throw ParseError("config line " + std::to_string(line_no) + ": unterminated string");
            std::string value;
            for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
                if (raw[i] == '\\' && i + 2 < raw.size()) {
                    char next = raw[++i];
                    value += next == 'n' ? '\n' : next == 't' ? '\t' : next;
                } else {
                    value += raw[i];
                }
            }
            config.values_[full_key] = value;
        } else if (raw == "true" || raw == "false") {
            config.values_[full_key] = (raw == "true");
        } else if (raw.find('.') != std::string::npos || raw.find('e') != std::string::npos ||
                   raw.find('E') != std::string::npos) {
            try {
                config.values_[full_key] = std::stod(raw);
            } catch (const std::exception&) {
                throw ParseError("config line " + std::to_string(line_no) + ": bad float '" + raw + "'");
            }
        } else {
            try {
                config.values_[full_key] = static_cast<std::int64_t>(std::stoll(raw));
            } catch (const std::exception&) {
                throw ParseError("config line " + std::to_string(line_no) + ": bad value '" + raw + "'");
            }
        }
    }
    return config;
}

TomlConfig TomlConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::optional<std::string> TomlConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
    return std::nullopt;
}

std::optional<std::int64_t> TomlConfig::get_int(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* v = std::get_if<std::int64_t>(&it->second)) return *v;
    return std::nullopt;
}

std::optional<double> TomlConfig::get_double(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* v = std::get_if<double>(&it->second)) return *v;
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
    return std::nullopt;
}

std::optional<bool> TomlConfig::get_bool(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    if (const auto* v = std::get_if<bool>(&it->second)) return *v;
    return std::nullopt;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    if (count >= n) return indices;

    // Partial Fisher-Yates; the modulo reduction keeps the selection
    // byte-stable across platforms (mt19937_64 output is standardized).
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(count);
    std::sort(indices.begin(), indices.end());
    return indices;
}

}  // namespace spike
