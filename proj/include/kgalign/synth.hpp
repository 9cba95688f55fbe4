#pragma once
// Synthetic KG pairs with known alignment, for desk-scale experiments.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/rng.hpp"

namespace kgalign {

struct SynthSpec {
    std::size_t entity_count = 500;
    std::size_t relation_count = 20;
    double mean_degree = 6.0;  // forward triples per entity
    double edge_dropout = 0.0;
    double name_noise = 0.0;
    std::uint64_t seed = 1;
    bool reverse_relations = true;

    void validate() const {
        if (entity_count < 2 || relation_count < 1) throw ConfigError("synth: counts must be positive");
        if (!(mean_degree > 0.0)) throw ConfigError("synth: mean degree must be positive");
        if (!(edge_dropout >= 0.0 && edge_dropout < 1.0)) throw ConfigError("synth: dropout must lie in [0, 1)");
        if (!(name_noise >= 0.0 && name_noise < 1.0)) throw ConfigError("synth: name noise must lie in [0, 1)");
    }
};

namespace detail {

inline std::string random_name(Rng& rng) {
    static constexpr char consonants[] = "bcdfghjklmnprstvwz";
    static constexpr char vowels[] = "aeiou";
    const std::size_t syllables = 2 + rng.index(3);
    std::string s;
    for (std::size_t i = 0; i < syllables; ++i) {
        s.push_back(consonants[rng.index(sizeof(consonants) - 1)]);
        s.push_back(vowels[rng.index(sizeof(vowels) - 1)]);
        if (rng.bernoulli(0.3)) s.push_back(consonants[rng.index(sizeof(consonants) - 1)]);
    }
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

// Substitutes a few characters (at least one) with random lowercase letters.
inline std::string perturb_name(const std::string& name, Rng& rng) {
    std::string s = name;
    const std::size_t edits = 1 + s.size() / 5;
    for (std::size_t i = 0; i < edits; ++i) {
        const std::size_t pos = rng.index(s.size());
        char c;
        do {
            c = static_cast<char>('a' + rng.index(26));
        } while (c == s[pos]);
        s[pos] = c;
    }
    return s;
}

}  // namespace detail

// Random directed multigraph plus an isomorphic copy with independent edge
// dropout, bijectively renamed relations and perturbed entity names. Truth
// pairs each source entity with its copy; entities left without triples on
// either side drop out of the graphs and the truth.
inline KgPair synth_pair(const SynthSpec& spec, std::vector<std::string>* warnings = nullptr) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n = spec.entity_count;

    std::vector<std::string> names;
    std::unordered_set<std::string> used;
    while (names.size() < n) {
        auto s = detail::random_name(rng);
        if (used.insert(s).second) names.push_back(std::move(s));
    }

    // Zipf-like relation frequencies give a spread of functionality values.
    std::vector<double> cumulative(spec.relation_count);
    double total = 0.0;
    for (std::size_t r = 0; r < spec.relation_count; ++r) {
        total += 1.0 / static_cast<double>(r + 1);
        cumulative[r] = total;
    }
    auto draw_relation = [&] {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                                  static_cast<std::ptrdiff_t>(spec.relation_count) - 1));
    };

    const auto wanted = static_cast<std::size_t>(std::llround(spec.mean_degree * static_cast<double>(n)));
    std::vector<std::array<std::size_t, 3>> edges;
    std::set<std::array<std::size_t, 3>> seen;
    std::size_t attempts = 0;
    while (edges.size() < wanted && attempts < 20 * wanted + 100) {
        ++attempts;
        const std::size_t h = rng.index(n);
        std::size_t t = rng.index(n - 1);
        if (t >= h) ++t;
        std::array<std::size_t, 3> e{h, draw_relation(), t};
        if (seen.insert(e).second) edges.push_back(e);
    }

    std::vector<std::size_t> degree(n, 0);
    for (const auto& e : edges) {
        ++degree[e[0]];
        ++degree[e[2]];
    }
    const auto isolated = static_cast<std::size_t>(std::count(degree.begin(), degree.end(), 0));
    if (warnings && 2 * isolated > n) {
        warnings->push_back("synth: " + std::to_string(isolated) + " of " + std::to_string(n) +
                            " entities have no triples");
    }

    std::vector<std::size_t> relation_perm(spec.relation_count);
    for (std::size_t i = 0; i < relation_perm.size(); ++i) relation_perm[i] = i;
    rng.shuffle(relation_perm);

    std::vector<std::string> target_names = names;
    std::unordered_set<std::string> target_used(names.begin(), names.end());
    const auto noisy = static_cast<std::size_t>(std::llround(spec.name_noise * static_cast<double>(n)));
    for (std::size_t i : rng.sample(n, noisy)) {
        std::string s;
        do {
            s = detail::perturb_name(names[i], rng);
        } while (target_used.count(s));
        target_used.erase(target_names[i]);
        target_used.insert(s);
        target_names[i] = s;
    }

    auto src_uri = [&](std::size_t i) { return "http://source.synth/entity/" + names[i]; };
    auto tgt_uri = [&](std::size_t i) { return "http://target.synth/entity/" + target_names[i]; };

    KgBuilder source, target;
    std::vector<std::array<std::size_t, 3>> kept;
    for (const auto& e : edges) {
        source.add(src_uri(e[0]), "http://source.synth/relation/r" + std::to_string(e[1]), src_uri(e[2]));
        if (!rng.bernoulli(spec.edge_dropout)) kept.push_back(e);
    }
    // Shuffled so that target ids carry no information about source ids.
    rng.shuffle(kept);
    for (const auto& e : kept) {
        target.add(tgt_uri(e[0]), "http://target.synth/relation/p" + std::to_string(relation_perm[e[1]]),
                   tgt_uri(e[2]));
    }

    KgPair pair;
    pair.source = source.finish(spec.reverse_relations);
    pair.target = target.finish(spec.reverse_relations);
    std::vector<std::pair<std::string, std::string>> links;
    for (std::size_t i = 0; i < n; ++i) {
        if (pair.source.find_entity(src_uri(i)) && pair.target.find_entity(tgt_uri(i))) {
            links.emplace_back(src_uri(i), tgt_uri(i));
        }
    }
    std::sort(links.begin(), links.end(), [&](const auto& a, const auto& b) {
        return *pair.source.find_entity(a.first) < *pair.source.find_entity(b.first);
    });
    pair.truth = resolve_links(pair.source, pair.target, links, "synth");
    return pair;
}

}  // namespace kgalign
