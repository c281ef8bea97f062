#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace curvcone::cli {

enum class KeyType { String, Int, Real, Seed, Format };

struct KeySpec {
    std::string key;
    KeyType type;
    std::string fallback;  // empty: optional with no default (echoed as null), unless required
    bool required = false;
    std::string help;
};

const std::vector<std::string>& command_names();
// Schema of one command; throws InputError for an unknown command.
const std::vector<KeySpec>& command_keys(const std::string& command);

struct RunConfig {
    std::string command;
    std::map<std::string, std::string> values;

    explicit RunConfig(std::string cmd);

    // Rejects unknown keys and values that do not parse as the key's type.
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values.count(key) > 0; }

    // Value or schema default; nullopt when neither exists.
    std::optional<std::string> raw(const std::string& key) const;
    std::string str(const std::string& key) const;
    int integer(const std::string& key) const;
    double real(const std::string& key) const;
    std::optional<double> maybe_real(const std::string& key) const;
    std::uint64_t seed(const std::string& key) const;

    // Throws InputError naming the first required key without a value.
    void check_required() const;
};

// key = value lines; '#' starts a comment, blank lines are skipped.
void merge_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config");
void merge_config_file(RunConfig& cfg, const std::string& path);

// name:k=v,k=v; the name part is everything before the first ':'.
struct Spec {
    std::string name;
    std::map<std::string, std::string> params;

    // Fails on parameters other than `allowed`.
    void allow(const std::vector<std::string>& allowed) const;
    double real(const std::string& key, double fallback) const;
    int integer(const std::string& key, int fallback) const;
};
Spec parse_spec(const std::string& text);

int parse_int(const std::string& text, const std::string& what);
double parse_real(const std::string& text, const std::string& what);
std::uint64_t parse_seed(const std::string& text, const std::string& what);

}  // namespace curvcone::cli
