#pragma once
// CLI support: a flat TOML-subset config file and the deterministic corpus
// sampler. Precedence is resolved by the CLI layer: explicit flags beat
// environment variables beat config file values beat defaults.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spike {

// Supports [section] headers and key = value lines where value is a quoted
// string, integer, float or boolean. Comments start with '#'. Keys are
// addressed as "section.key" ("key" alone before any section header).
class TomlConfig {
public:
    static TomlConfig parse(const std::string& text);
    static TomlConfig parse_file(const std::string& path);

    std::optional<std::string> get_string(const std::string& key) const;
    std::optional<std::int64_t> get_int(const std::string& key) const;
    std::optional<double> get_double(const std::string& key) const;
    std::optional<bool> get_bool(const std::string& key) const;
    bool has(const std::string& key) const { return values_.count(key) > 0; }

private:
    using Value = std::variant<std::string, std::int64_t, double, bool>;
    std::map<std::string, Value> values_;
};

// Picks `count` distinct indices out of [0, n) with a seeded generator;
// result is sorted ascending so the input order is preserved downstream.
// The same (n, count, seed) always produces the same subset.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace spike
