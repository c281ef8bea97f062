#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "curvcone/curvop.hpp"

namespace curvcone::cli {

namespace {

std::vector<KeySpec> with_common(std::vector<KeySpec> keys, const std::string& grid, const std::string& tol,
                                 const std::string& seed) {
    keys.push_back({"seed", KeyType::Seed, seed, false, "RNG seed"});
    keys.push_back({"grid", KeyType::Int, grid, false, "sample grid resolution"});
    keys.push_back({"tol", KeyType::Real, tol, false, "tolerance"});
    keys.push_back({"threads", KeyType::Int, "0", false, "worker threads (0: runtime default)"});
    keys.push_back({"format", KeyType::Format, "json", false, "json or csv"});
    keys.push_back({"out", KeyType::String, "", false, "output path (stdout when empty)"});
    return keys;
}

const std::map<std::string, std::vector<KeySpec>>& schema() {
    static const std::map<std::string, std::vector<KeySpec>> s = {
        {"check", with_common({{"operator", KeyType::String, "", true, "operator spec"},
                               {"condition", KeyType::String, "scal", false, "condition spec"}},
                              "256", "", "1")},
        {"bend", with_common({{"model", KeyType::String, "round-point", false, "model spec"},
                              {"n", KeyType::Int, "4", false, "dimension"},
                              {"condition", KeyType::String, "scal", false, "condition spec"},
                              {"rbar", KeyType::Real, "0.5", false, "outer radius of the bent region"},
                              {"rtarget", KeyType::Real, "", false, "final radius"},
                              {"drop", KeyType::Real, "1", false, "log r* - log r_target when rtarget is unset"},
                              {"normals", KeyType::Int, "2", false, "normal directions per sample"},
                              {"oracles", KeyType::Int, "6", false, "finite-difference samples"}},
                             "9", "1e-5", "1")},
        {"conformal", with_common({{"chart", KeyType::String, "sphere", false, "sphere or flat"},
                                   {"n", KeyType::Int, "4", false, "dimension"},
                                   {"condition", KeyType::String, "scal", false, "condition spec"},
                                   {"gamma", KeyType::Real, "", false, "end radius"},
                                   {"loggamma", KeyType::Real, "", false, "log of the end radius"},
                                   {"drop", KeyType::Real, "1", false, "log gamma_max - log gamma when unset"},
                                   {"normals", KeyType::Int, "4", false, "normal directions"},
                                   {"oracles", KeyType::Int, "12", false, "finite-difference samples"}},
                                  "96", "1e-5", "7")},
        {"rescale", with_common({{"submersion", KeyType::String, "hopf", false, "hopf or product:..."},
                                 {"condition", KeyType::String, "spectral:eps=0.5", false, "condition spec"},
                                 {"tmin", KeyType::Real, "1e-3", false, "smallest fiber scale"}},
                                "24", "1e-9", "1")},
        {"average", with_common({{"operator", KeyType::String, "", true, "operator spec"},
                                 {"d", KeyType::Int, "", true, "sphere dimension of the orbit"},
                                 {"samples", KeyType::Int, "100000", false, "Haar samples"}},
                                "64", "1e-2", "1")},
        {"oracle", with_common({{"model", KeyType::String, "round-point", false, "model spec"},
                                {"n", KeyType::Int, "4", false, "dimension"},
                                {"condition", KeyType::String, "scal", false, "condition spec"}},
                               "6", "", "1")},
    };
    return s;
}

const KeySpec* find_key(const std::string& command, const std::string& key) {
    for (const auto& k : command_keys(command))
        if (k.key == key) return &k;
    return nullptr;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void check_type(const KeySpec& k, const std::string& value) {
    std::string what = "key '" + k.key + "'";
    switch (k.type) {
        case KeyType::Int: parse_int(value, what); break;
        case KeyType::Real: parse_real(value, what); break;
        case KeyType::Seed: parse_seed(value, what); break;
        case KeyType::Format:
            if (value != "json" && value != "csv") throw InputError(what + ": expected json or csv, got '" + value + "'");
            break;
        case KeyType::String: break;
    }
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"check", "bend", "conformal", "rescale", "average", "oracle"};
    return names;
}

const std::vector<KeySpec>& command_keys(const std::string& command) {
    auto it = schema().find(command);
    if (it == schema().end()) throw InputError("unknown command '" + command + "'");
    return it->second;
}

int parse_int(const std::string& text, const std::string& what) {
    int v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) throw InputError(what + ": not an integer: '" + text + "'");
    return v;
}

double parse_real(const std::string& text, const std::string& what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v))
        throw InputError(what + ": not a finite number: '" + text + "'");
    return v;
}

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size()) throw InputError(what + ": not a seed: '" + text + "'");
    return v;
}

RunConfig::RunConfig(std::string cmd) : command(std::move(cmd)) { command_keys(command); }

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "command") {
        if (value != command) throw InputError("config is for command '" + value + "', not '" + command + "'");
        return;
    }
    const KeySpec* k = find_key(command, key);
    if (!k) throw InputError("unknown key '" + key + "' for command '" + command + "'");
    check_type(*k, value);
    values[key] = value;
}

std::optional<std::string> RunConfig::raw(const std::string& key) const {
    auto it = values.find(key);
    if (it != values.end()) return it->second;
    const KeySpec* k = find_key(command, key);
    if (!k) throw InputError("unknown key '" + key + "' for command '" + command + "'");
    if (k->fallback.empty()) return std::nullopt;
    return k->fallback;
}

std::string RunConfig::str(const std::string& key) const { return raw(key).value_or(""); }

int RunConfig::integer(const std::string& key) const {
    auto v = raw(key);
    if (!v) throw InputError("missing value for '" + key + "'");
    return parse_int(*v, "key '" + key + "'");
}

double RunConfig::real(const std::string& key) const {
    auto v = maybe_real(key);
    if (!v) throw InputError("missing value for '" + key + "'");
    return *v;
}

std::optional<double> RunConfig::maybe_real(const std::string& key) const {
    auto v = raw(key);
    if (!v) return std::nullopt;
    return parse_real(*v, "key '" + key + "'");
}

std::uint64_t RunConfig::seed(const std::string& key) const {
    auto v = raw(key);
    if (!v) throw InputError("missing value for '" + key + "'");
    return parse_seed(*v, "key '" + key + "'");
}

void RunConfig::check_required() const {
    for (const auto& k : command_keys(command))
        if (k.required && !has(k.key)) throw InputError(command + ": missing required key '" + k.key + "'");
}

void merge_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        try {
            cfg.set(key, value);
        } catch (const InputError& e) {
            throw InputError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void merge_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    merge_config_text(cfg, ss.str(), path);
}

Spec parse_spec(const std::string& text) {
    Spec s;
    auto colon = text.find(':');
    s.name = trim(text.substr(0, colon));
    if (s.name.empty()) throw InputError("empty spec '" + text + "'");
    if (colon == std::string::npos) return s;
    std::string rest = text.substr(colon + 1);
    if (s.name == "file") {
        s.params["path"] = rest;
        return s;
    }
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("spec '" + text + "': expected k=v, got '" + item + "'");
        std::string k = trim(item.substr(0, eq));
        if (s.params.count(k)) throw InputError("spec '" + text + "': repeated parameter '" + k + "'");
        s.params[k] = trim(item.substr(eq + 1));
    }
    return s;
}

void Spec::allow(const std::vector<std::string>& allowed) const {
    for (const auto& [k, v] : params)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw InputError("'" + name + "': unknown parameter '" + k + "'");
}

double Spec::real(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : parse_real(it->second, name + " parameter '" + key + "'");
}

int Spec::integer(const std::string& key, int fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : parse_int(it->second, name + " parameter '" + key + "'");
}

}  // namespace curvcone::cli
