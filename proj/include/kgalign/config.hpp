#pragma once
// Run configuration and its flat key=value file format. Blank lines and
// lines starting with '#' are ignored; unknown keys are errors.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/llm.hpp"
#include "kgalign/matcher.hpp"
#include "kgalign/refiner.hpp"
#include "kgalign/selector.hpp"
#include "kgalign/synth.hpp"

namespace kgalign {

enum class BackendKind { oracle, noisy_oracle, llm };

enum class Variant { full, no_refiner, no_active, ur_only, nu_only, degree, func_sum, random_select };

inline std::string to_string(BackendKind b) {
    switch (b) {
        case BackendKind::oracle: return "oracle";
        case BackendKind::noisy_oracle: return "noisy";
        case BackendKind::llm: return "llm";
    }
    return "oracle";
}

inline BackendKind parse_backend(const std::string& s) {
    if (s == "oracle") return BackendKind::oracle;
    if (s == "noisy" || s == "noisy-oracle") return BackendKind::noisy_oracle;
    if (s == "llm") return BackendKind::llm;
    throw ConfigError("unknown backend '" + s + "' (expected oracle, noisy or llm)");
}

inline const std::vector<std::pair<Variant, std::string>>& variant_names() {
    static const std::vector<std::pair<Variant, std::string>> names = {
        {Variant::full, "full"},          {Variant::no_refiner, "no-refiner"}, {Variant::no_active, "no-active"},
        {Variant::ur_only, "ur-only"},    {Variant::nu_only, "nu-only"},       {Variant::degree, "degree"},
        {Variant::func_sum, "funcSum"},   {Variant::random_select, "random-select"}};
    return names;
}

inline std::string to_string(Variant v) {
    for (const auto& [k, name] : variant_names()) {
        if (k == v) return name;
    }
    return "full";
}

inline Variant parse_variant(const std::string& s) {
    for (const auto& [k, name] : variant_names()) {
        if (name == s) return k;
    }
    throw ConfigError("unknown variant '" + s + "'");
}

inline SelectionStrategy strategy_for(Variant v) {
    switch (v) {
        case Variant::no_active:
        case Variant::random_select: return SelectionStrategy::random;
        case Variant::ur_only: return SelectionStrategy::relational_only;
        case Variant::nu_only: return SelectionStrategy::neighbor_only;
        case Variant::degree: return SelectionStrategy::degree;
        case Variant::func_sum: return SelectionStrategy::func_sum;
        default: return SelectionStrategy::combined;
    }
}

// Standard synthetic fixture used by the experiments and tests.
inline SynthSpec standard_fixture(std::uint64_t seed) {
    SynthSpec s;
    s.entity_count = 500;
    s.relation_count = 20;
    s.mean_degree = 6.0;
    s.edge_dropout = 0.1;
    s.name_noise = 0.2;
    s.seed = seed;
    return s;
}

struct RunConfig {
    double budget_fraction = 0.1;
    int iterations = 3;
    std::size_t k = 20;
    RefinerConfig refiner;
    MatcherConfig matcher;
    BackendKind backend = BackendKind::oracle;
    double p_true = 0.6;
    LlmConfig llm;
    std::uint64_t seed = 1;
    std::filesystem::path data;  // OpenEA directory; synth spec used when empty
    SynthSpec synth = standard_fixture(1);
    std::optional<std::uint64_t> synth_seed;  // defaults to `seed`
    std::filesystem::path label_cache;
    std::optional<std::size_t> max_tokens;
    Variant variant = Variant::full;
    bool timing = false;  // wall time in reports (breaks byte-identical output)

    void validate() const {
        if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) throw ConfigError("budget_fraction must lie in (0, 1]");
        if (iterations < 1) throw ConfigError("iterations must be >= 1");
        if (k < 1) throw ConfigError("k must be >= 1");
        if (!(p_true >= 0.0 && p_true <= 1.0)) throw ConfigError("p_true must lie in [0, 1]");
        refiner.validate();
        matcher.validate();
        if (data.empty()) synth.validate();
        if (backend == BackendKind::llm) llm.validate();
    }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("config key '" + key + "': bad number '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

}  // namespace detail

// Applies one key=value setting.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& v) {
    using detail::parse_bool;
    using detail::parse_number;
    if (key == "budget_fraction") c.budget_fraction = parse_number<double>(key, v);
    else if (key == "iterations") c.iterations = parse_number<int>(key, v);
    else if (key == "k") c.k = parse_number<std::size_t>(key, v);
    else if (key == "delta0") c.refiner.delta0 = parse_number<double>(key, v);
    else if (key == "delta1") c.refiner.delta1 = parse_number<double>(key, v);
    else if (key == "refiner_iterations") c.refiner.iterations = parse_number<int>(key, v);
    else if (key == "theta_min") c.refiner.theta_min = parse_number<double>(key, v);
    else if (key == "augment_inferred") c.refiner.augment_inferred = parse_bool(key, v);
    else if (key == "matcher.dim") c.matcher.dim = parse_number<std::size_t>(key, v);
    else if (key == "matcher.epochs") c.matcher.epochs = parse_number<int>(key, v);
    else if (key == "matcher.learning_rate") c.matcher.learning_rate = parse_number<double>(key, v);
    else if (key == "matcher.margin") c.matcher.margin = parse_number<double>(key, v);
    else if (key == "matcher.negatives") c.matcher.negatives = parse_number<std::size_t>(key, v);
    else if (key == "matcher.rounds") c.matcher.rounds = parse_number<int>(key, v);
    else if (key == "matcher.free_scale") c.matcher.free_scale = parse_number<double>(key, v);
    else if (key == "backend") c.backend = parse_backend(v);
    else if (key == "p_true") c.p_true = parse_number<double>(key, v);
    else if (key == "llm.url") c.llm.url = v;
    else if (key == "llm.model") c.llm.model = v;
    else if (key == "llm.api_key_env") c.llm.api_key_env = v;
    else if (key == "llm.retries") c.llm.retries = parse_number<int>(key, v);
    else if (key == "llm.parallelism") c.llm.parallelism = parse_number<std::size_t>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "data") c.data = v;
    else if (key == "synth.entities") c.synth.entity_count = parse_number<std::size_t>(key, v);
    else if (key == "synth.relations") c.synth.relation_count = parse_number<std::size_t>(key, v);
    else if (key == "synth.degree") c.synth.mean_degree = parse_number<double>(key, v);
    else if (key == "synth.dropout") c.synth.edge_dropout = parse_number<double>(key, v);
    else if (key == "synth.name_noise") c.synth.name_noise = parse_number<double>(key, v);
    else if (key == "synth.seed") c.synth_seed = parse_number<std::uint64_t>(key, v);
    else if (key == "label_cache") c.label_cache = v;
    else if (key == "max_tokens") c.max_tokens = parse_number<std::size_t>(key, v);
    else if (key == "variant") c.variant = parse_variant(v);
    else if (key == "timing") c.timing = parse_bool(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

inline RunConfig read_config(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.filename().string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        try {
            apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

}  // namespace kgalign
