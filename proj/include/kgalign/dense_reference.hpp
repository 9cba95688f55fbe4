#pragma once
// Brute-force reasoning over a full |E| x |E'| table. Used as the oracle for
// the lazy engine in reasoning.hpp: every pair and every relation pair is
// evaluated, with no candidate generation and no sparsity shortcuts. After
// each entity update the table is reduced to the entries that are the best
// of their row or column, which is exactly what the lazy engine stores.

#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"

namespace kgalign {

struct DenseTable {
    std::size_t rows = 0, cols = 0;
    std::vector<double> values;

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    // Column index of the row maximum (smallest index on ties), or -1 when
    // the row is all zero.
    std::int64_t row_argmax(std::size_t r) const {
        std::int64_t best = -1;
        double v = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (at(r, c) > v) {
                v = at(r, c);
                best = static_cast<std::int64_t>(c);
            }
        }
        return best;
    }
    std::int64_t col_argmax(std::size_t c) const {
        std::int64_t best = -1;
        double v = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            if (at(r, c) > v) {
                v = at(r, c);
                best = static_cast<std::int64_t>(r);
            }
        }
        return best;
    }
};

struct DenseReasoning {
    DenseTable entity;  // |E| x |E'|
    DenseTable fwd;     // |R| x |R'|, P(r <= r')
    DenseTable bwd;     // |R'| x |R|, P(r' <= r)
};

namespace detail {

inline DenseTable zeros(std::size_t r, std::size_t c) {
    DenseTable t;
    t.rows = r;
    t.cols = c;
    t.values.assign(r * c, 0.0);
    return t;
}

inline void keep_row_col_best(DenseTable& t) {
    std::vector<char> keep(t.values.size(), 0);
    for (std::size_t r = 0; r < t.rows; ++r) {
        auto c = t.row_argmax(r);
        if (c >= 0) keep[r * t.cols + c] = 1;
    }
    for (std::size_t c = 0; c < t.cols; ++c) {
        auto r = t.col_argmax(c);
        if (r >= 0) keep[r * t.cols + c] = 1;
    }
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        if (!keep[i]) t.values[i] = 0.0;
    }
}

// P(a <= b) for every relation a of `from` and b of `to`; `p(x, y)` is the
// equivalence probability of x in `from` and y in `to`.
template <typename Prob>
DenseTable dense_subrelations(const KnowledgeGraph& from, const KnowledgeGraph& to, Prob p, double theta_min) {
    DenseTable out = zeros(from.relation_count(), to.relation_count());
    const auto ft = from.triples();
    const auto tt = to.triples();
    for (RelationId a = 0; a < from.relation_count(); ++a) {
        double den = 0.0;
        for (TripleId i : from.relation_triples(a)) {
            double prod = 1.0;
            for (EntityId h2 = 0; h2 < to.entity_count(); ++h2) {
                for (EntityId t2 = 0; t2 < to.entity_count(); ++t2) {
                    prod *= (1.0 - p(ft[i].head, h2) * p(ft[i].tail, t2));
                }
            }
            den += 1.0 - prod;
        }
        if (den <= 0.0) continue;
        for (RelationId b = 0; b < to.relation_count(); ++b) {
            double num = 0.0;
            for (TripleId i : from.relation_triples(a)) {
                double prod = 1.0;
                for (TripleId j : to.relation_triples(b)) {
                    prod *= (1.0 - p(ft[i].head, tt[j].head) * p(ft[i].tail, tt[j].tail));
                }
                num += 1.0 - prod;
            }
            const double v = num / den;
            if (v >= theta_min) out.at(a, b) = v;
        }
    }
    return out;
}

inline void dense_subrel_update(DenseReasoning& d, const KgPair& pair, double theta_min) {
    const DenseTable& e = d.entity;
    d.fwd = dense_subrelations(pair.source, pair.target,
                               [&](EntityId s, EntityId t) { return e.at(s, t); }, theta_min);
    d.bwd = dense_subrelations(pair.target, pair.source,
                               [&](EntityId t, EntityId s) { return e.at(s, t); }, theta_min);
}

inline void dense_entity_update(DenseReasoning& d, const KgPair& pair, double theta_min) {
    const KnowledgeGraph& src = pair.source;
    const KnowledgeGraph& tgt = pair.target;
    DenseTable next = zeros(src.entity_count(), tgt.entity_count());
    for (EntityId h = 0; h < src.entity_count(); ++h) {
        for (EntityId h2 = 0; h2 < tgt.entity_count(); ++h2) {
            double prod = 1.0;
            for (const Edge& e : src.out_edges(h)) {
                for (const Edge& e2 : tgt.out_edges(h2)) {
                    const double p = d.entity.at(e.entity, e2.entity);
                    prod *= (1.0 - src.inverse_functionality(e.relation) * d.fwd.at(e.relation, e2.relation) * p) *
                            (1.0 - tgt.inverse_functionality(e2.relation) * d.bwd.at(e2.relation, e.relation) * p);
                }
            }
            const double v = 1.0 - prod;
            if (v > 0.0 && v >= theta_min) next.at(h, h2) = v;
        }
    }
    keep_row_col_best(next);
    d.entity = std::move(next);
}

}  // namespace detail

// Seeds at p0, initial subrelation pass, then `rounds` rounds of
// (entity update, subrelation update). Guarded to |E| * |E'| <= 10,000.
inline DenseReasoning dense_reference(const KgPair& pair, std::span<const EntityPair> seeds, double p0, int rounds,
                                      double theta_min = 0.0) {
    const std::size_t n = pair.source.entity_count();
    const std::size_t m = pair.target.entity_count();
    if (n * m > 10000) throw ConfigError("dense reference limited to |E|*|E'| <= 10000");
    DenseReasoning d;
    d.entity = detail::zeros(n, m);
    for (auto [s, t] : seeds) {
        if (s >= n || t >= m) throw DataError("seed references an invalid entity");
        d.entity.at(s, t) = std::max(d.entity.at(s, t), p0);
    }
    detail::keep_row_col_best(d.entity);
    detail::dense_subrel_update(d, pair, theta_min);
    for (int i = 0; i < rounds; ++i) {
        detail::dense_entity_update(d, pair, theta_min);
        detail::dense_subrel_update(d, pair, theta_min);
    }
    return d;
}

}  // namespace kgalign
