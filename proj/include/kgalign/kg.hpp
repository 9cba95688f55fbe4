#pragma once
// Knowledge graph storage, indexing and OpenEA flat-file I/O.
//
// A KnowledgeGraph is immutable once built. Relation ids [0, base) are the
// relations read from input; when reverse materialization is on, ids
// [base, 2*base) hold the synthetic reversed relations r^-1 whose triples
// are the forward ones with head and tail swapped.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgalign/error.hpp"

namespace kgalign {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TripleId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

// One adjacency entry: the relation, the entity at the other end, and the
// id of the underlying triple.
// Distinct heads, distinct tails and distinct (head, tail) pairs of one
// relation; F = heads / pairs.
struct RelationCounts {
    std::size_t heads = 0;
    std::size_t tails = 0;
    std::size_t pairs = 0;
};

struct Edge {
    RelationId relation;
    EntityId entity;
    TripleId triple;
};

using EntityPair = std::pair<EntityId, EntityId>;

// Substring after the final '/', percent-decoded. Falls back to the whole
// URI when that segment is empty.
inline std::string name_from_uri(std::string_view uri) {
    auto slash = uri.rfind('/');
    std::string_view seg = slash == std::string_view::npos ? uri : uri.substr(slash + 1);
    if (seg.empty()) seg = uri;
    auto hex = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::string out;
    out.reserve(seg.size());
    for (std::size_t i = 0; i < seg.size(); ++i) {
        if (seg[i] == '%' && i + 2 < seg.size()) {
            int hi = hex(seg[i + 1]);
            int lo = hex(seg[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 2;
                continue;
            }
        }
        out.push_back(seg[i]);
    }
    if (out.empty()) out = std::string(uri);
    return out;
}

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Builds the graph from URI catalogs and forward triples. Duplicate
    // triples are dropped and counted.
    static KnowledgeGraph build(std::vector<std::string> entity_uris,
                                std::vector<std::string> relation_uris,
                                std::vector<Triple> triples, bool reverse_relations = true) {
        KnowledgeGraph kg;
        kg.entity_uris_ = std::move(entity_uris);
        kg.relation_uris_ = std::move(relation_uris);
        kg.base_relations_ = static_cast<RelationId>(kg.relation_uris_.size());
        kg.reversed_ = reverse_relations;

        for (const auto& t : triples) {
            if (t.head >= kg.entity_uris_.size() || t.tail >= kg.entity_uris_.size() ||
                t.relation >= kg.base_relations_) {
                throw DataError("triple references an unknown entity or relation");
            }
        }
        std::sort(triples.begin(), triples.end());
        auto last = std::unique(triples.begin(), triples.end());
        kg.duplicates_ = static_cast<std::size_t>(triples.end() - last);
        triples.erase(last, triples.end());
        kg.forward_count_ = triples.size();

        kg.entity_names_.reserve(kg.entity_uris_.size());
        for (std::size_t i = 0; i < kg.entity_uris_.size(); ++i) {
            kg.entity_index_.emplace(kg.entity_uris_[i], static_cast<EntityId>(i));
            kg.entity_names_.push_back(name_from_uri(kg.entity_uris_[i]));
        }
        for (const auto& uri : kg.relation_uris_) kg.relation_names_.push_back(name_from_uri(uri));

        if (reverse_relations) {
            const std::size_t n = triples.size();
            triples.reserve(2 * n);
            for (std::size_t i = 0; i < n; ++i) {
                const Triple t = triples[i];
                triples.push_back({t.tail, t.relation + kg.base_relations_, t.head});
            }
            for (RelationId r = 0; r < kg.base_relations_; ++r) {
                kg.relation_names_.push_back(kg.relation_names_[r] + "^-1");
            }
            std::sort(triples.begin(), triples.end());
        }
        kg.triples_ = std::move(triples);
        kg.index();
        return kg;
    }

    std::size_t entity_count() const { return entity_uris_.size(); }
    // Includes reversed relations when materialized.
    std::size_t relation_count() const { return relation_names_.size(); }
    std::size_t base_relation_count() const { return base_relations_; }
    bool has_reversed_relations() const { return reversed_; }
    bool is_reversed(RelationId r) const { return r >= base_relations_; }
    RelationId base_of(RelationId r) const { return r >= base_relations_ ? r - base_relations_ : r; }

    const std::string& entity_name(EntityId e) const { return entity_names_.at(e); }
    const std::string& entity_uri(EntityId e) const { return entity_uris_.at(e); }
    const std::string& relation_name(RelationId r) const { return relation_names_.at(r); }
    const std::string& relation_uri(RelationId r) const { return relation_uris_.at(base_of(r)); }

    std::optional<EntityId> find_entity(const std::string& uri) const {
        auto it = entity_index_.find(uri);
        if (it == entity_index_.end()) return std::nullopt;
        return it->second;
    }

    // All materialized triples, sorted by (head, relation, tail). A triple's
    // id is its position here.
    std::span<const Triple> triples() const { return triples_; }
    std::size_t forward_triple_count() const { return forward_count_; }
    std::size_t duplicate_count() const { return duplicates_; }

    std::vector<Triple> forward_triples() const {
        std::vector<Triple> out;
        out.reserve(forward_count_);
        for (const auto& t : triples_) {
            if (!is_reversed(t.relation)) out.push_back(t);
        }
        return out;
    }

    // Outgoing edges of e ordered by (relation, tail).
    std::span<const Edge> out_edges(EntityId e) const {
        check_entity(e);
        return std::span<const Edge>(out_).subspan(out_offset_[e], out_offset_[e + 1] - out_offset_[e]);
    }
    // Incoming edges of e ordered by (relation, head).
    std::span<const Edge> in_edges(EntityId e) const {
        check_entity(e);
        return std::span<const Edge>(in_).subspan(in_offset_[e], in_offset_[e + 1] - in_offset_[e]);
    }

    std::vector<std::pair<RelationId, EntityId>> neighbors_out(EntityId e) const {
        std::vector<std::pair<RelationId, EntityId>> out;
        for (const auto& edge : out_edges(e)) out.emplace_back(edge.relation, edge.entity);
        return out;
    }
    std::vector<std::pair<RelationId, EntityId>> neighbors_in(EntityId e) const {
        std::vector<std::pair<RelationId, EntityId>> out;
        for (const auto& edge : in_edges(e)) out.emplace_back(edge.relation, edge.entity);
        return out;
    }

    std::size_t degree(EntityId e) const { return out_edges(e).size(); }

    std::span<const TripleId> relation_triples(RelationId r) const {
        return by_relation_.at(r);
    }

    // Distinct heads over distinct (head, tail) pairs.
    double functionality(RelationId r) const {
        check_defined(r);
        return functionality_[r];
    }
    // Distinct tails over distinct (head, tail) pairs.
    double inverse_functionality(RelationId r) const {
        check_defined(r);
        return inverse_functionality_[r];
    }
    const RelationCounts& counts(RelationId r) const {
        check_defined(r);
        return counts_[r];
    }
    bool has_triples(RelationId r) const { return !by_relation_.at(r).empty(); }

private:
    void check_entity(EntityId e) const {
        if (e >= entity_uris_.size()) throw DataError("invalid entity handle " + std::to_string(e));
    }
    void check_defined(RelationId r) const {
        if (r >= relation_names_.size()) throw DataError("invalid relation handle " + std::to_string(r));
        if (by_relation_[r].empty()) {
            throw DataError("functionality undefined for relation without triples: " + relation_names_[r]);
        }
    }

    void index() {
        const std::size_t n = entity_uris_.size();
        out_offset_.assign(n + 1, 0);
        in_offset_.assign(n + 1, 0);
        for (const auto& t : triples_) {
            ++out_offset_[t.head + 1];
            ++in_offset_[t.tail + 1];
        }
        for (std::size_t i = 0; i < n; ++i) {
            out_offset_[i + 1] += out_offset_[i];
            in_offset_[i + 1] += in_offset_[i];
        }
        out_.resize(triples_.size());
        in_.resize(triples_.size());
        auto out_fill = out_offset_;
        auto in_fill = in_offset_;
        by_relation_.assign(relation_names_.size(), {});
        for (TripleId id = 0; id < triples_.size(); ++id) {
            const Triple& t = triples_[id];
            out_[out_fill[t.head]++] = {t.relation, t.tail, id};
            in_[in_fill[t.tail]++] = {t.relation, t.head, id};
            by_relation_[t.relation].push_back(id);
        }
        for (std::size_t e = 0; e < n; ++e) {
            std::sort(in_.begin() + in_offset_[e], in_.begin() + in_offset_[e + 1],
                      [](const Edge& a, const Edge& b) {
                          return std::tie(a.relation, a.entity) < std::tie(b.relation, b.entity);
                      });
        }

        functionality_.assign(relation_names_.size(), 0.0);
        inverse_functionality_.assign(relation_names_.size(), 0.0);
        counts_.assign(relation_names_.size(), {});
        for (RelationId r = 0; r < base_relations_; ++r) {
            const auto& ids = by_relation_[r];
            if (ids.empty()) continue;
            std::vector<EntityId> heads, tails;
            for (auto id : ids) {
                heads.push_back(triples_[id].head);
                tails.push_back(triples_[id].tail);
            }
            std::sort(heads.begin(), heads.end());
            std::sort(tails.begin(), tails.end());
            const double h = static_cast<double>(std::unique(heads.begin(), heads.end()) - heads.begin());
            const double t = static_cast<double>(std::unique(tails.begin(), tails.end()) - tails.begin());
            // triples are deduplicated, so |ids| is the number of distinct pairs
            const double pairs = static_cast<double>(ids.size());
            functionality_[r] = h / pairs;
            inverse_functionality_[r] = t / pairs;
            counts_[r] = {static_cast<std::size_t>(h), static_cast<std::size_t>(t), ids.size()};
            if (reversed_) {
                functionality_[r + base_relations_] = inverse_functionality_[r];
                inverse_functionality_[r + base_relations_] = functionality_[r];
                counts_[r + base_relations_] = {counts_[r].tails, counts_[r].heads, counts_[r].pairs};
            }
        }
    }

    std::vector<std::string> entity_uris_;
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_uris_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, EntityId> entity_index_;
    RelationId base_relations_ = 0;
    bool reversed_ = false;
    std::size_t forward_count_ = 0;
    std::size_t duplicates_ = 0;

    std::vector<Triple> triples_;
    std::vector<std::size_t> out_offset_, in_offset_;
    std::vector<Edge> out_, in_;
    std::vector<std::vector<TripleId>> by_relation_;
    std::vector<double> functionality_, inverse_functionality_;
    std::vector<RelationCounts> counts_;
};

// Two graphs plus an optional source -> target ground truth.
struct KgPair {
    KnowledgeGraph source;
    KnowledgeGraph target;
    std::optional<std::vector<EntityPair>> truth;

    bool has_truth() const { return truth.has_value(); }

    // target_of[s] = counterpart of s, or -1.
    std::vector<std::int64_t> truth_map() const {
        std::vector<std::int64_t> m(source.entity_count(), -1);
        if (truth) {
            for (auto [s, t] : *truth) m[s] = t;
        }
        return m;
    }
};

// Accumulates string-level triples and assigns dense ids in first-seen order.
class KgBuilder {
public:
    void add(const std::string& head, const std::string& relation, const std::string& tail) {
        EntityId h = intern(entities_, entity_ids_, head);
        RelationId r = intern(relations_, relation_ids_, relation);
        EntityId t = intern(entities_, entity_ids_, tail);
        triples_.push_back({h, r, t});
    }

    KnowledgeGraph finish(bool reverse_relations) {
        return KnowledgeGraph::build(std::move(entities_), std::move(relations_), std::move(triples_),
                                     reverse_relations);
    }

private:
    static std::uint32_t intern(std::vector<std::string>& names,
                                std::unordered_map<std::string, std::uint32_t>& ids,
                                const std::string& key) {
        auto [it, inserted] = ids.emplace(key, static_cast<std::uint32_t>(names.size()));
        if (inserted) names.push_back(key);
        return it->second;
    }

    std::vector<std::string> entities_, relations_;
    std::unordered_map<std::string, std::uint32_t> entity_ids_, relation_ids_;
    std::vector<Triple> triples_;
};

struct LoadOptions {
    bool reverse_relations = true;
    // ent_links is optional unless this is set.
    bool require_links = false;
};

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

// Calls fn(fields, line_number) for each non-blank line; enforces arity.
template <typename Fn>
void read_tsv(const std::filesystem::path& path, std::size_t arity, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        bool empty_field = std::any_of(fields.begin(), fields.end(), [](const auto& f) { return f.empty(); });
        if (fields.size() != arity || empty_field) {
            throw DataError(path.filename().string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(arity) + " tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        fn(fields, lineno);
    }
}

inline KnowledgeGraph load_triples(const std::filesystem::path& path, bool reverse) {
    KgBuilder b;
    read_tsv(path, 3, [&](const std::vector<std::string>& f, std::size_t) { b.add(f[0], f[1], f[2]); });
    return b.finish(reverse);
}

}  // namespace detail

// Resolves URI-level links against the two graphs.
inline std::vector<EntityPair> resolve_links(const KnowledgeGraph& source, const KnowledgeGraph& target,
                                             const std::vector<std::pair<std::string, std::string>>& links,
                                             const std::string& origin = "ent_links") {
    std::vector<EntityPair> out;
    std::vector<char> seen(source.entity_count(), 0);
    for (std::size_t i = 0; i < links.size(); ++i) {
        auto s = source.find_entity(links[i].first);
        auto t = target.find_entity(links[i].second);
        const std::string where = origin + ":" + std::to_string(i + 1);
        if (!s) throw DataError(where + ": source entity not present in triples: " + links[i].first);
        if (!t) throw DataError(where + ": target entity not present in triples: " + links[i].second);
        if (seen[*s]) throw DataError(where + ": source entity linked twice: " + links[i].first);
        seen[*s] = 1;
        out.emplace_back(*s, *t);
    }
    return out;
}

// Reads rel_triples_1, rel_triples_2 and (optionally) ent_links.
inline KgPair load_openea(const std::filesystem::path& dir, const LoadOptions& opts = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    for (const char* f : {"rel_triples_1", "rel_triples_2"}) {
        if (!fs::exists(dir / f)) throw DataError("missing file: " + (dir / f).string());
    }
    KgPair pair;
    pair.source = detail::load_triples(dir / "rel_triples_1", opts.reverse_relations);
    pair.target = detail::load_triples(dir / "rel_triples_2", opts.reverse_relations);
    const auto links_path = dir / "ent_links";
    if (fs::exists(links_path)) {
        std::vector<std::pair<std::string, std::string>> links;
        detail::read_tsv(links_path, 2, [&](const std::vector<std::string>& f, std::size_t) {
            links.emplace_back(f[0], f[1]);
        });
        pair.truth = resolve_links(pair.source, pair.target, links);
    } else if (opts.require_links) {
        throw DataError("missing file: " + links_path.string());
    }
    return pair;
}

inline void write_triples(const KnowledgeGraph& kg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& t : kg.forward_triples()) {
        out << kg.entity_uri(t.head) << '\t' << kg.relation_uri(t.relation) << '\t' << kg.entity_uri(t.tail)
            << '\n';
    }
}

// Writes the pair back in OpenEA layout (forward triples only).
inline void save_openea(const KgPair& pair, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_triples(pair.source, dir / "rel_triples_1");
    write_triples(pair.target, dir / "rel_triples_2");
    if (pair.truth) {
        std::ofstream out(dir / "ent_links", std::ios::binary);
        for (auto [s, t] : *pair.truth) {
            out << pair.source.entity_uri(s) << '\t' << pair.target.entity_uri(t) << '\n';
        }
    }
}

}  // namespace kgalign
