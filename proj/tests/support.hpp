#pragma once
// Helpers for building small graphs by name.

#include <filesystem>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "kgalign/kg.hpp"

namespace kgtest {

using NamedTriple = std::tuple<std::string, std::string, std::string>;

inline kgalign::KnowledgeGraph make_kg(const std::vector<NamedTriple>& triples, bool reverse = true,
                                       const std::string& base = "http://x/") {
    kgalign::KgBuilder b;
    for (const auto& [h, r, t] : triples) b.add(base + h, base + r, base + t);
    return b.finish(reverse);
}

inline kgalign::EntityId id(const kgalign::KnowledgeGraph& kg, const std::string& name,
                            const std::string& base = "http://x/") {
    return kg.find_entity(base + name).value();
}

// Source names live under http://s/, target names under http://t/.
inline kgalign::KgPair make_pair(const std::vector<NamedTriple>& src, const std::vector<NamedTriple>& tgt,
                                 const std::vector<std::pair<std::string, std::string>>& links = {},
                                 bool reverse = true) {
    kgalign::KgPair p;
    p.source = make_kg(src, reverse, "http://s/");
    p.target = make_kg(tgt, reverse, "http://t/");
    std::vector<std::pair<std::string, std::string>> uris;
    for (const auto& [a, b] : links) uris.emplace_back("http://s/" + a, "http://t/" + b);
    if (!links.empty()) p.truth = kgalign::resolve_links(p.source, p.target, uris, "links");
    return p;
}

inline kgalign::EntityId sid(const kgalign::KgPair& p, const std::string& n) { return id(p.source, n, "http://s/"); }
inline kgalign::EntityId tid(const kgalign::KgPair& p, const std::string& n) { return id(p.target, n, "http://t/"); }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    auto d = std::filesystem::temp_directory_path() / ("kgalign_test_" + tag);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace kgtest

#include "kgalign/rng.hpp"
#include "kgalign/synth.hpp"

namespace kgtest {

// Small correlated pair: a synthetic graph and a noisy copy.
inline kgalign::KgPair small_pair(std::uint64_t seed, std::size_t entities, double degree = 2.0,
                                  double dropout = 0.2, std::size_t relations = 4) {
    kgalign::SynthSpec s;
    s.entity_count = entities;
    s.relation_count = relations;
    s.mean_degree = degree;
    s.edge_dropout = dropout;
    s.seed = seed;
    return kgalign::synth_pair(s);
}

// Some true pairs plus some random (usually wrong) ones.
inline std::vector<kgalign::EntityPair> mixed_seeds(const kgalign::KgPair& p, kgalign::Rng& rng, std::size_t good,
                                                    std::size_t bad) {
    std::vector<kgalign::EntityPair> out;
    const auto& truth = *p.truth;
    for (auto i : rng.sample(truth.size(), good)) out.push_back(truth[i]);
    for (std::size_t i = 0; i < bad; ++i) {
        out.emplace_back(kgalign::EntityId(rng.index(p.source.entity_count())),
                         kgalign::EntityId(rng.index(p.target.entity_count())));
    }
    return out;
}

}  // namespace kgtest
