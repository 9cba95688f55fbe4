#pragma once
// Probabilistic reasoning over a KG pair: entity-equivalence and
// subrelation probabilities, stored lazily.
//
// Only each entity's most probable counterpart is kept (one map per side).
// The probability of any other pair is taken as 0. Updates never mutate
// their input; each returns a fresh snapshot.
//
// Entity update, for every pair (h, h') with evidence:
//
//   P(h = h') = 1 - prod over (h,r,t) in T, (h',r',t') in T' of
//                 (1 - Finv(r)  P(r <= r') P(t = t'))
//               * (1 - Finv(r') P(r' <= r) P(t = t'))
//
// Subrelation update, summing over the triples (h,r,t) of r:
//
//   P(r <= r') = sum(1 - prod over (h',r',t') in T' of (1 - P(h = h') P(t = t')))
//              / sum(1 - prod over h',t' in E'    of (1 - P(h = h') P(t = t')))
//
// Products are accumulated in (triple id, triple id) order so that results
// are bit-reproducible.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <iomanip>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"

namespace kgalign {

struct ReasoningConfig {
    int iterations = 10;
    // Probabilities below this are dropped from the sparse maps.
    double theta_min = 1e-4;

    void validate() const {
        if (iterations < 1) throw ConfigError("reasoning iterations must be >= 1");
        if (!(theta_min >= 0.0 && theta_min < 1.0)) throw ConfigError("theta_min must lie in [0, 1)");
    }
};

struct Match {
    std::int64_t partner = -1;
    double prob = 0.0;

    bool present() const { return partner >= 0; }
    friend bool operator==(const Match&, const Match&) = default;
};

// Sparse (a, b) -> probability map. Absent keys read as 0.
class SubrelationTable {
public:
    double get(RelationId a, RelationId b) const {
        auto it = map_.find(key(a, b));
        return it == map_.end() ? 0.0 : it->second;
    }
    void set(RelationId a, RelationId b, double p) {
        if (p > 0.0) {
            map_[key(a, b)] = p;
        } else {
            map_.erase(key(a, b));
        }
    }
    std::size_t size() const { return map_.size(); }
    bool empty() const { return map_.empty(); }

    // Entries sorted by (a, b).
    std::vector<std::tuple<RelationId, RelationId, double>> entries() const {
        std::vector<std::tuple<RelationId, RelationId, double>> out;
        out.reserve(map_.size());
        for (auto [k, p] : map_) {
            out.emplace_back(static_cast<RelationId>(k >> 32), static_cast<RelationId>(k & 0xffffffffu), p);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    friend bool operator==(const SubrelationTable& a, const SubrelationTable& b) { return a.map_ == b.map_; }

private:
    static std::uint64_t key(RelationId a, RelationId b) {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }
    std::unordered_map<std::uint64_t, double> map_;
};

struct ScoredPair {
    EntityId source;
    EntityId target;
    double prob;

    friend bool operator==(const ScoredPair&, const ScoredPair&) = default;
};

namespace detail {

// Whether (prob, id) should displace the current best match. Ties go to the
// smaller id.
inline bool beats(double prob, EntityId id, const Match& current) {
    if (!current.present()) return prob > 0.0;
    if (prob != current.prob) return prob > current.prob;
    return static_cast<std::int64_t>(id) < current.partner;
}

}  // namespace detail

struct AlignmentState {
    std::vector<Match> best_of_source;
    std::vector<Match> best_of_target;
    SubrelationTable subrel_fwd;  // (r, r') -> P(r <= r')
    SubrelationTable subrel_bwd;  // (r', r) -> P(r' <= r)

    static AlignmentState empty(const KgPair& pair) {
        AlignmentState s;
        s.best_of_source.resize(pair.source.entity_count());
        s.best_of_target.resize(pair.target.entity_count());
        return s;
    }

    // P(s = t) under lazy storage.
    double prob(EntityId s, EntityId t) const {
        const Match& a = best_of_source.at(s);
        if (a.partner == static_cast<std::int64_t>(t)) return a.prob;
        const Match& b = best_of_target.at(t);
        if (b.partner == static_cast<std::int64_t>(s)) return b.prob;
        return 0.0;
    }

    // P(e) := max over e' of P(e = e').
    double prob_of(EntityId s) const {
        return s < best_of_source.size() ? best_of_source[s].prob : 0.0;
    }
    double prob_of_target(EntityId t) const {
        return t < best_of_target.size() ? best_of_target[t].prob : 0.0;
    }

    // Sets P(s = t) to max(P(s = t), p) on both sides, displacing weaker
    // best matches.
    void raise(EntityId s, EntityId t, double p) {
        if (s >= best_of_source.size() || t >= best_of_target.size()) {
            throw DataError("alignment pair references an invalid entity");
        }
        const double v = std::max(prob(s, t), p);
        Match& a = best_of_source[s];
        if (a.partner == static_cast<std::int64_t>(t)) {
            a.prob = v;
        } else if (detail::beats(v, t, a)) {
            a = {t, v};
        }
        Match& b = best_of_target[t];
        if (b.partner == static_cast<std::int64_t>(s)) {
            b.prob = v;
        } else if (detail::beats(v, s, b)) {
            b = {s, v};
        }
    }

    // Every stored pair once, sorted by (source, target).
    std::vector<ScoredPair> stored_pairs() const {
        std::vector<ScoredPair> out;
        for (EntityId s = 0; s < best_of_source.size(); ++s) {
            const Match& m = best_of_source[s];
            if (m.present()) out.push_back({s, static_cast<EntityId>(m.partner), m.prob});
        }
        for (EntityId t = 0; t < best_of_target.size(); ++t) {
            const Match& m = best_of_target[t];
            if (!m.present()) continue;
            if (best_of_source[m.partner].partner == static_cast<std::int64_t>(t)) continue;
            out.push_back({static_cast<EntityId>(m.partner), t, m.prob});
        }
        std::sort(out.begin(), out.end(), [](const ScoredPair& a, const ScoredPair& b) {
            return std::tie(a.source, a.target) < std::tie(b.source, b.target);
        });
        return out;
    }

    friend bool operator==(const AlignmentState&, const AlignmentState&) = default;
};

inline double prob_of(const AlignmentState& state, EntityId e) { return state.prob_of(e); }

// Sets each pair to max(existing, p0).
inline AlignmentState seed(AlignmentState state, std::span<const EntityPair> pairs, double p0) {
    if (!(p0 > 0.0 && p0 < 1.0)) throw ConfigError("seed probability must lie in (0, 1)");
    for (auto [s, t] : pairs) state.raise(s, t, p0);
    return state;
}

namespace detail {

// For each entity on one side, its stored partners on the other side sorted
// by id.
struct PartnerIndex {
    std::vector<std::vector<std::pair<EntityId, double>>> of_source;
    std::vector<std::vector<std::pair<EntityId, double>>> of_target;

    explicit PartnerIndex(const AlignmentState& state) {
        of_source.resize(state.best_of_source.size());
        of_target.resize(state.best_of_target.size());
        for (const auto& p : state.stored_pairs()) {
            of_source[p.source].emplace_back(p.target, p.prob);
            of_target[p.target].emplace_back(p.source, p.prob);
        }
        // stored_pairs is sorted by source, so of_target lists are already
        // ordered; of_source lists hold at most a few entries
        for (auto& v : of_source) std::sort(v.begin(), v.end());
    }
};

struct EvidenceTerm {
    EntityId candidate;
    TripleId own_triple;
    TripleId other_triple;
    double factor;
};

// One half of the subrelation update: P(a <= b) for relations a of `from`
// and b of `to`. `own` lists partners (in `to`) of each `from` entity.
inline SubrelationTable subrelation_pass(const KnowledgeGraph& from, const KnowledgeGraph& to,
                                         const std::vector<std::vector<std::pair<EntityId, double>>>& own,
                                         double theta_min) {
    std::vector<double> den(from.relation_count(), 0.0);
    std::unordered_map<std::uint64_t, double> num;
    std::vector<std::tuple<RelationId, TripleId, double>> terms;
    const auto triples = from.triples();
    for (TripleId id = 0; id < triples.size(); ++id) {
        const Triple& tr = triples[id];
        const auto& heads = own[tr.head];
        const auto& tails = own[tr.tail];
        if (heads.empty() || tails.empty()) continue;

        double all = 1.0;
        for (auto [h2, ph] : heads) {
            for (auto [t2, pt] : tails) all *= (1.0 - ph * pt);
        }
        den[tr.relation] += 1.0 - all;

        terms.clear();
        for (auto [h2, ph] : heads) {
            for (const Edge& e : to.out_edges(h2)) {
                for (auto [t2, pt] : tails) {
                    if (t2 == e.entity) terms.emplace_back(e.relation, e.triple, 1.0 - ph * pt);
                }
            }
        }
        std::sort(terms.begin(), terms.end());
        for (std::size_t i = 0; i < terms.size();) {
            const RelationId r2 = std::get<0>(terms[i]);
            double prod = 1.0;
            for (; i < terms.size() && std::get<0>(terms[i]) == r2; ++i) prod *= std::get<2>(terms[i]);
            num[(static_cast<std::uint64_t>(tr.relation) << 32) | r2] += 1.0 - prod;
        }
    }
    SubrelationTable out;
    for (auto [k, n] : num) {
        const double d = den[k >> 32];
        if (d <= 0.0) continue;
        const double p = n / d;
        if (p > 0.0 && p >= theta_min) out.set(static_cast<RelationId>(k >> 32), static_cast<RelationId>(k & 0xffffffffu), p);
    }
    return out;
}

}  // namespace detail

// Recomputes every entity pair with neighbor evidence from the input
// snapshot and keeps, per source and per target, the best pair.
// Subrelation probabilities are carried over unchanged.
inline AlignmentState update_entity_probs(const AlignmentState& in, const KgPair& pair,
                                          const ReasoningConfig& cfg = {}) {
    const KnowledgeGraph& src = pair.source;
    const KnowledgeGraph& tgt = pair.target;
    detail::PartnerIndex partners(in);

    AlignmentState out;
    out.best_of_source.resize(src.entity_count());
    out.best_of_target.resize(tgt.entity_count());
    out.subrel_fwd = in.subrel_fwd;
    out.subrel_bwd = in.subrel_bwd;

    std::vector<detail::EvidenceTerm> terms;
    for (EntityId h = 0; h < src.entity_count(); ++h) {
        terms.clear();
        for (const Edge& e : src.out_edges(h)) {
            const double finv = src.inverse_functionality(e.relation);
            for (auto [t2, p] : partners.of_source[e.entity]) {
                for (const Edge& e2 : tgt.in_edges(t2)) {
                    const double fwd = in.subrel_fwd.get(e.relation, e2.relation);
                    const double bwd = in.subrel_bwd.get(e2.relation, e.relation);
                    if (fwd == 0.0 && bwd == 0.0) continue;
                    const double finv2 = tgt.inverse_functionality(e2.relation);
                    const double f = (1.0 - finv * fwd * p) * (1.0 - finv2 * bwd * p);
                    terms.push_back({e2.entity, e.triple, e2.triple, f});
                }
            }
        }
        std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
            return std::tie(a.candidate, a.own_triple, a.other_triple) <
                   std::tie(b.candidate, b.own_triple, b.other_triple);
        });
        for (std::size_t i = 0; i < terms.size();) {
            const EntityId h2 = terms[i].candidate;
            double prod = 1.0;
            for (; i < terms.size() && terms[i].candidate == h2; ++i) prod *= terms[i].factor;
            const double p = 1.0 - prod;
            if (p <= 0.0 || p < cfg.theta_min) continue;
            if (detail::beats(p, h2, out.best_of_source[h])) out.best_of_source[h] = {h2, p};
            if (detail::beats(p, h, out.best_of_target[h2])) out.best_of_target[h2] = {h, p};
        }
    }
    return out;
}

// Recomputes P(r <= r') and P(r' <= r) from the snapshot's entity
// probabilities. Only relation pairs that co-occur on aligned endpoints are
// visited; all others are 0.
inline AlignmentState update_subrel_probs(const AlignmentState& in, const KgPair& pair,
                                          const ReasoningConfig& cfg = {}) {
    detail::PartnerIndex partners(in);
    AlignmentState out;
    out.best_of_source = in.best_of_source;
    out.best_of_target = in.best_of_target;
    out.subrel_fwd = detail::subrelation_pass(pair.source, pair.target, partners.of_source, cfg.theta_min);
    out.subrel_bwd = detail::subrelation_pass(pair.target, pair.source, partners.of_target, cfg.theta_min);
    return out;
}

// One entity update followed by one subrelation update.
inline AlignmentState reasoning_round(const AlignmentState& in, const KgPair& pair,
                                      const ReasoningConfig& cfg = {}) {
    return update_subrel_probs(update_entity_probs(in, pair, cfg), pair, cfg);
}

// Seeds the pairs at p0, derives initial subrelation probabilities from the
// seeds, then runs cfg.iterations rounds.
inline AlignmentState run_reasoning(const KgPair& pair, std::span<const EntityPair> seeds, double p0,
                                    const ReasoningConfig& cfg = {}) {
    cfg.validate();
    AlignmentState state = seed(AlignmentState::empty(pair), seeds, p0);
    state = update_subrel_probs(state, pair, cfg);
    for (int i = 0; i < cfg.iterations; ++i) state = reasoning_round(state, pair, cfg);
    return state;
}

// Debug dump: source_id<TAB>target_id<TAB>probability per stored pair.
inline void write_snapshot(const AlignmentState& state, std::ostream& out) {
    out << std::setprecision(17);
    for (const auto& p : state.stored_pairs()) out << p.source << '\t' << p.target << '\t' << p.prob << '\n';
}

}  // namespace kgalign
