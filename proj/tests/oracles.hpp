#pragma once
// Independent reference computations shared by the unit tests and the
// acceptance runner. Deliberately naive.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "kgalign/kgalign.hpp"

namespace oracle {

using namespace kgalign;

struct Metrics {
    double hit1 = 0, hit10 = 0, mrr = 0;
};

// Rank of `want` in a list sorted by descending score where the wanted item
// is placed after every item with an equal score.
inline std::size_t pessimistic_rank(const std::vector<double>& scores, std::size_t want) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a != want && b == want;
    });
    return std::size_t(std::find(order.begin(), order.end(), want) - order.begin()) + 1;
}

inline Metrics metrics(const ScoreMatrix& sm, const std::vector<EntityPair>& truth) {
    Metrics m;
    std::size_t n = 0;
    for (auto [s, t] : truth) {
        std::vector<double> row(sm.cols), col(sm.rows);
        for (std::size_t c = 0; c < sm.cols; ++c) row[c] = sm.at(s, c);
        for (std::size_t r = 0; r < sm.rows; ++r) col[r] = sm.at(r, t);
        for (auto rank : {pessimistic_rank(row, t), pessimistic_rank(col, s)}) {
            m.hit1 += rank == 1;
            m.hit10 += rank <= 10;
            m.mrr += 1.0 / double(rank);
            ++n;
        }
    }
    m.hit1 /= double(n);
    m.hit10 /= double(n);
    m.mrr /= double(n);
    return m;
}

struct Prf {
    std::optional<double> precision;
    double recall = 0;
    std::optional<double> f1;
};

inline Prf prf(const std::vector<EntityPair>& pairs, const std::vector<EntityPair>& truth) {
    std::set<EntityPair> a(pairs.begin(), pairs.end()), b(truth.begin(), truth.end());
    std::size_t hit = 0;
    for (const auto& x : a) hit += b.count(x);
    Prf out;
    if (!a.empty()) out.precision = double(hit) / double(a.size());
    if (!b.empty()) out.recall = double(hit) / double(b.size());
    if (out.precision) {
        const double p = *out.precision, r = out.recall;
        out.f1 = p + r == 0 ? 0.0 : 2 * p * r / (p + r);
    }
    return out;
}

// Incompatibility of a set against a state, by scanning every entity.
inline std::size_t phi(const std::vector<EntityPair>& set, const AlignmentState& st) {
    std::size_t out = 0;
    for (auto [s, t] : set) {
        const double p = st.prob(s, t);
        double best_s = 0, best_t = 0;
        for (EntityId y = 0; y < st.best_of_target.size(); ++y) best_s = std::max(best_s, st.prob(s, y));
        for (EntityId x = 0; x < st.best_of_source.size(); ++x) best_t = std::max(best_t, st.prob(x, t));
        out += (p < best_s) + (p < best_t);
    }
    return out;
}

// 1 + sum of F(r) over e's edges (reversed edges weighted by the inverse
// functionality), from raw forward triples. Per relation the group adds
// count * heads / pairs, in relation-id order.
inline double closed_form_ur(const std::vector<Triple>& forward, std::size_t base_relations, EntityId e) {
    std::map<RelationId, std::set<EntityId>> groups;
    for (const auto& t : forward) {
        if (t.head == e) groups[t.relation].insert(t.tail);
        if (t.tail == e) groups[RelationId(t.relation + base_relations)].insert(t.head);
    }
    double sum = 0.0;
    for (const auto& [r, nb] : groups) {
        const RelationId base = r >= base_relations ? RelationId(r - base_relations) : r;
        std::set<EntityId> heads, tails;
        std::set<std::pair<EntityId, EntityId>> pairs;
        for (const auto& t : forward) {
            if (t.relation != base) continue;
            heads.insert(t.head);
            tails.insert(t.tail);
            pairs.insert({t.head, t.tail});
        }
        const double num = double(r >= base_relations ? tails.size() : heads.size());
        sum += num * double(nb.size()) / double(pairs.size());
    }
    return 1.0 + sum;
}

inline std::size_t distinct_neighbours(const std::vector<Triple>& forward, EntityId e) {
    std::set<std::pair<std::int64_t, EntityId>> nb;
    for (const auto& t : forward) {
        if (t.head == e) nb.insert({t.relation, t.tail});
        if (t.tail == e) nb.insert({-1 - std::int64_t(t.relation), t.head});
    }
    return nb.size();
}

// Colour refinement over undirected neighbourhoods with the anchors given
// distinct initial colours. True when every entity ends with its own colour.
inline bool unique_structure(const KnowledgeGraph& g, const std::vector<EntityId>& anchors) {
    const std::size_t n = g.entity_count();
    std::vector<long> colour(n, 0);
    for (std::size_t i = 0; i < anchors.size(); ++i) colour[anchors[i]] = long(i) + 1;
    for (std::size_t round = 0; round < n; ++round) {
        std::map<std::pair<long, std::vector<long>>, long> ids;
        std::vector<long> next(n);
        for (EntityId e = 0; e < n; ++e) {
            std::set<EntityId> nb;
            for (const auto& edge : g.out_edges(e)) nb.insert(edge.entity);
            for (const auto& edge : g.in_edges(e)) nb.insert(edge.entity);
            std::vector<long> seen;
            for (auto v : nb) seen.push_back(colour[v]);
            std::sort(seen.begin(), seen.end());
            next[e] = ids.emplace(std::make_pair(colour[e], seen), long(ids.size())).first->second;
        }
        colour = next;
    }
    return std::set<long>(colour.begin(), colour.end()).size() == n;
}

// Central finite differences of the margin loss.
inline std::vector<double> numeric_gradient(const detail::Aggregator& agg, std::size_t n, std::size_t dim, int rounds,
                                            double margin, std::vector<double> x,
                                            const std::vector<MarginSample>& samples, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double up = margin_loss_and_gradient(agg, n, dim, rounds, margin, x, samples, nullptr);
        x[i] = keep - step;
        const double down = margin_loss_and_gradient(agg, n, dim, rounds, margin, x, samples, nullptr);
        x[i] = keep;
        g[i] = (up - down) / (2 * step);
    }
    return g;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nb));
    return scale == 0 ? 0 : std::sqrt(diff) / scale;
}

// Samples shaped like the trainer's: one side of the positive pair replaced by
// a different entity. Needs n, m >= 2.
inline std::vector<MarginSample> corrupted_samples(Rng& rng, std::size_t n, std::size_t m, std::size_t count) {
    std::vector<MarginSample> out;
    for (std::size_t i = 0; i < count; ++i) {
        MarginSample s{EntityId(rng.index(n)), EntityId(rng.index(m)), 0, 0};
        s.neg_source = s.source;
        s.neg_target = s.target;
        if (rng.index(2) == 0) {
            s.neg_target = EntityId((s.target + 1 + rng.index(m - 1)) % m);
        } else {
            s.neg_source = EntityId((s.source + 1 + rng.index(n - 1)) % n);
        }
        out.push_back(s);
    }
    return out;
}

// True when both gradients sit at roundoff level, where a relative error is
// 0/0 (e.g. aggregation collapsed the positive and negative rows).
inline bool both_flat(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
    double na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(na) < floor && std::sqrt(nb) < floor;
}

// Smallest distance from any hinge or distance kink, so callers can skip
// instances where finite differences straddle a non-smooth point.
inline double kink_clearance(const detail::Aggregator& agg, std::size_t n, std::size_t dim, int rounds, double margin,
                             const std::vector<double>& x, const std::vector<MarginSample>& samples) {
    std::vector<double> h = x, tmp;
    for (int l = 0; l < rounds; ++l) {
        agg.forward(h, tmp, dim);
        std::swap(h, tmp);
    }
    double clear = 1e300;
    for (const auto& s : samples) {
        const double dp = detail::distance(&h[s.source * dim], &h[(n + s.target) * dim], dim);
        const double dn = detail::distance(&h[s.neg_source * dim], &h[(n + s.neg_target) * dim], dim);
        clear = std::min({clear, std::abs(margin + dp - dn), dp, dn});
    }
    return clear;
}

}  // namespace oracle
