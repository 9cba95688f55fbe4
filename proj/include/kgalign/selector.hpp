#pragma once
// Budget-aware selection of source entities to annotate.
//
// Relational uncertainty weights each neighbor's uncertainty by the
// functionality of the connecting relation; neighbor uncertainty drops the
// weight. The two are combined through their ranks:
//
//   U_r(e) = (1 - P(e)) + sum over (e,r,t) of w_r (1 - P(t))
//   U_n(e) = (1 - P(e)) + sum over (e,r,t) of     (1 - P(t))
//   U(e)   = 2 (1 / rank_r(e) + 1 / rank_n(e))

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/reasoning.hpp"
#include "kgalign/rng.hpp"

namespace kgalign {

enum class RelationWeight { functionality, inverse_functionality };

enum class SelectionStrategy { combined, relational_only, neighbor_only, degree, func_sum, random };

// Sum over out-edges of F(r) * (1 - P(neighbor)). Edges are grouped by
// relation and each group contributes count * heads / pairs in a single
// division, so e.g. a hub with k edges of a relation with F = 1/k gets
// exactly 1 rather than k rounded copies of 1/k.
inline double weighted_edge_sum(const KnowledgeGraph& kg, EntityId e, const AlignmentState& state,
                                RelationWeight weight) {
    const auto edges = kg.out_edges(e);
    double u = 0.0;
    for (std::size_t i = 0; i < edges.size();) {
        const RelationId r = edges[i].relation;
        double open = 0.0;
        for (; i < edges.size() && edges[i].relation == r; ++i) open += 1.0 - state.prob_of(edges[i].entity);
        const RelationCounts& c = kg.counts(r);
        const double num = static_cast<double>(weight == RelationWeight::functionality ? c.heads : c.tails);
        u += num * open / static_cast<double>(c.pairs);
    }
    return u;
}

inline std::vector<double> relational_uncertainty(const KgPair& pair, const AlignmentState& state,
                                                  RelationWeight weight = RelationWeight::functionality) {
    const KnowledgeGraph& kg = pair.source;
    std::vector<double> out(kg.entity_count());
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        out[e] = (1.0 - state.prob_of(e)) + weighted_edge_sum(kg, e, state, weight);
    }
    return out;
}

inline std::vector<double> neighbor_uncertainty(const KgPair& pair, const AlignmentState& state) {
    const KnowledgeGraph& kg = pair.source;
    std::vector<double> out(kg.entity_count());
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        double u = 1.0 - state.prob_of(e);
        for (const Edge& edge : kg.out_edges(e)) u += 1.0 - state.prob_of(edge.entity);
        out[e] = u;
    }
    return out;
}

// Ordinal ranks (1 = largest score), ties broken by ascending id.
inline std::vector<std::size_t> ordinal_ranks(std::span<const double> scores, std::span<const EntityId> ids) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    std::vector<std::size_t> rank(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i + 1;
    return rank;
}

// Scores over a candidate pool; all vectors are parallel to `entities`.
struct UncertaintyScores {
    std::vector<EntityId> entities;
    std::vector<double> u_r;
    std::vector<double> u_n;
    std::vector<std::size_t> rank_ur;
    std::vector<std::size_t> rank_un;
    std::vector<double> u;
};

inline UncertaintyScores aggregate(std::vector<EntityId> entities, std::vector<double> u_r, std::vector<double> u_n) {
    if (u_r.size() != entities.size() || u_n.size() != entities.size()) {
        throw ConfigError("aggregate: score vectors must cover the same entities");
    }
    UncertaintyScores s;
    s.rank_ur = ordinal_ranks(u_r, entities);
    s.rank_un = ordinal_ranks(u_n, entities);
    s.u.resize(entities.size());
    for (std::size_t i = 0; i < entities.size(); ++i) {
        s.u[i] = 2.0 * (1.0 / static_cast<double>(s.rank_ur[i]) + 1.0 / static_cast<double>(s.rank_un[i]));
    }
    s.entities = std::move(entities);
    s.u_r = std::move(u_r);
    s.u_n = std::move(u_n);
    return s;
}

// Computes and aggregates both uncertainties over the entities not yet
// annotated. `annotated` may be empty (nothing annotated).
inline UncertaintyScores score_entities(const KgPair& pair, const AlignmentState& state,
                                        const std::vector<char>& annotated,
                                        RelationWeight weight = RelationWeight::functionality) {
    const auto ur_all = relational_uncertainty(pair, state, weight);
    const auto un_all = neighbor_uncertainty(pair, state);
    std::vector<EntityId> ids;
    std::vector<double> ur, un;
    for (EntityId e = 0; e < pair.source.entity_count(); ++e) {
        if (e < annotated.size() && annotated[e]) continue;
        ids.push_back(e);
        ur.push_back(ur_all[e]);
        un.push_back(un_all[e]);
    }
    return aggregate(std::move(ids), std::move(ur), std::move(un));
}

// Top-k by a score vector parallel to `entities`, ties by ascending id,
// skipping annotated entities.
inline std::vector<EntityId> top_k(std::span<const EntityId> entities, std::span<const double> score,
                                   const std::vector<char>& annotated, std::size_t k) {
    if (k == 0) throw ConfigError("select: k must be >= 1");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const EntityId e = entities[i];
        if (e < annotated.size() && annotated[e]) continue;
        order.push_back(i);
    }
    const std::size_t n = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (score[a] != score[b]) return score[a] > score[b];
                          return entities[a] < entities[b];
                      });
    std::vector<EntityId> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(entities[order[i]]);
    return out;
}

inline std::vector<EntityId> select(const UncertaintyScores& scores, const std::vector<char>& annotated, std::size_t k) {
    return top_k(scores.entities, scores.u, annotated, k);
}

inline std::string to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::combined: return "combined";
        case SelectionStrategy::relational_only: return "ur-only";
        case SelectionStrategy::neighbor_only: return "nu-only";
        case SelectionStrategy::degree: return "degree";
        case SelectionStrategy::func_sum: return "funcSum";
        case SelectionStrategy::random: return "random";
    }
    return "combined";
}

// Picks up to k unannotated sources under the given strategy. The degree
// strategy scores 1 + degree and funcSum scores 1 + sum of F(r), both
// independent of the alignment state.
inline std::vector<EntityId> select_sources(const KgPair& pair, const AlignmentState& state,
                                            const std::vector<char>& annotated, std::size_t k,
                                            SelectionStrategy strategy, Rng& rng,
                                            RelationWeight weight = RelationWeight::functionality) {
    const KnowledgeGraph& kg = pair.source;
    std::vector<EntityId> ids;
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        if (!(e < annotated.size() && annotated[e])) ids.push_back(e);
    }
    switch (strategy) {
        case SelectionStrategy::combined:
            return select(score_entities(pair, state, annotated, weight), annotated, k);
        case SelectionStrategy::relational_only: {
            const auto all = relational_uncertainty(pair, state, weight);
            std::vector<double> s;
            for (auto e : ids) s.push_back(all[e]);
            return top_k(ids, s, annotated, k);
        }
        case SelectionStrategy::neighbor_only: {
            const auto all = neighbor_uncertainty(pair, state);
            std::vector<double> s;
            for (auto e : ids) s.push_back(all[e]);
            return top_k(ids, s, annotated, k);
        }
        case SelectionStrategy::degree: {
            std::vector<double> s;
            for (auto e : ids) s.push_back(1.0 + static_cast<double>(kg.degree(e)));
            return top_k(ids, s, annotated, k);
        }
        case SelectionStrategy::func_sum: {
            std::vector<double> s;
            const AlignmentState none = AlignmentState::empty(pair);
            for (auto e : ids) s.push_back(1.0 + weighted_edge_sum(kg, e, none, RelationWeight::functionality));
            return top_k(ids, s, annotated, k);
        }
        case SelectionStrategy::random: {
            if (k == 0) throw ConfigError("select: k must be >= 1");
            std::vector<EntityId> out;
            for (auto i : rng.sample(ids.size(), k)) out.push_back(ids[i]);
            return out;
        }
    }
    return {};
}

// CSV: entity_id,name,u_r,u_n,rank_ur,rank_un,u
inline void write_scores_csv(const UncertaintyScores& s, const KnowledgeGraph& kg, std::ostream& out) {
    out << "entity_id,name,u_r,u_n,rank_ur,rank_un,u\n" << std::setprecision(10);
    for (std::size_t i = 0; i < s.entities.size(); ++i) {
        std::string name = kg.entity_name(s.entities[i]);
        if (name.find_first_of(",\"\n") != std::string::npos) {
            std::string q = "\"";
            for (char c : name) {
                if (c == '"') q += '"';
                q += c;
            }
            name = q + "\"";
        }
        out << s.entities[i] << ',' << name << ',' << s.u_r[i] << ',' << s.u_n[i] << ',' << s.rank_ur[i] << ','
            << s.rank_un[i] << ',' << s.u[i] << '\n';
    }
}

}  // namespace kgalign
