#pragma once
// Embedding matcher trained on pseudo-labels, plus ranking metrics.
//
// Each entity of both graphs gets a free vector. Representations are
// `rounds` steps of mean aggregation over the entity and its neighbors, so
// h = A^L x with A row-normalized. Training minimizes
//
//   sum over (s,t) in labels, negatives n:  max(0, margin + d(s,t) - d(neg))
//
// with Euclidean d and the negative formed by swapping in a uniformly drawn
// entity on one side (alternating target / source corruption).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/labels.hpp"
#include "kgalign/rng.hpp"

namespace kgalign {

struct MatcherConfig {
    std::size_t dim = 64;
    int epochs = 200;
    double learning_rate = 0.01;
    double margin = 1.0;
    std::size_t negatives = 5;
    int rounds = 2;
    std::uint64_t seed = 1;
    // Labeled pairs start from one shared random vector.
    bool tie_seeds = true;
    // Init scale of entities outside the labels, relative to labeled ones.
    double free_scale = 0.1;

    void validate() const {
        if (dim < 2) throw ConfigError("matcher dim must be >= 2");
        if (epochs < 1) throw ConfigError("matcher epochs must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("matcher learning rate must be positive");
        if (!(margin > 0.0)) throw ConfigError("matcher margin must be positive");
        if (negatives < 1) throw ConfigError("matcher negatives must be >= 1");
        if (rounds < 1) throw ConfigError("matcher rounds must be >= 1");
        if (!(free_scale >= 0.0)) throw ConfigError("matcher free_scale must be >= 0");
    }
};

// Dense row-major scores, rows = source entities, columns = target entities.
struct ScoreMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    ScoreMatrix() = default;
    ScoreMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

class Matcher {
public:
    virtual ~Matcher() = default;
    // Higher means more likely aligned.
    virtual double score(EntityId source, EntityId target) const = 0;
    virtual std::size_t source_count() const = 0;
    virtual std::size_t target_count() const = 0;

    virtual ScoreMatrix score_matrix() const {
        ScoreMatrix m(source_count(), target_count());
        for (std::size_t s = 0; s < m.rows; ++s) {
            for (std::size_t t = 0; t < m.cols; ++t) m.at(s, t) = score(static_cast<EntityId>(s), static_cast<EntityId>(t));
        }
        return m;
    }
};

class MatrixMatcher : public Matcher {
public:
    explicit MatrixMatcher(ScoreMatrix m) : m_(std::move(m)) {}
    double score(EntityId s, EntityId t) const override { return m_.at(s, t); }
    std::size_t source_count() const override { return m_.rows; }
    std::size_t target_count() const override { return m_.cols; }
    ScoreMatrix score_matrix() const override { return m_; }

private:
    ScoreMatrix m_;
};

// Training sample: anchor pair plus one corrupted pair.
struct MarginSample {
    EntityId source;
    EntityId target;
    EntityId neg_source;
    EntityId neg_target;
};

namespace detail {

// Row-normalized aggregation over {u} ∪ neighbors(u), stored per row.
struct Aggregator {
    std::vector<std::vector<std::uint32_t>> rows;  // global ids (targets offset by source count)

    static Aggregator build(const KgPair& pair) {
        Aggregator a;
        const std::size_t n = pair.source.entity_count();
        auto add = [&](const KnowledgeGraph& kg, std::size_t offset) {
            for (EntityId e = 0; e < kg.entity_count(); ++e) {
                std::vector<std::uint32_t> row{static_cast<std::uint32_t>(offset + e)};
                for (const Edge& edge : kg.out_edges(e)) row.push_back(static_cast<std::uint32_t>(offset + edge.entity));
                for (const Edge& edge : kg.in_edges(e)) row.push_back(static_cast<std::uint32_t>(offset + edge.entity));
                std::sort(row.begin(), row.end());
                row.erase(std::unique(row.begin(), row.end()), row.end());
                a.rows.push_back(std::move(row));
            }
        };
        add(pair.source, 0);
        add(pair.target, n);
        return a;
    }

    // out = A * in, both (rows.size() x dim).
    void forward(const std::vector<double>& in, std::vector<double>& out, std::size_t dim) const {
        out.assign(in.size(), 0.0);
        for (std::size_t u = 0; u < rows.size(); ++u) {
            const double w = 1.0 / static_cast<double>(rows[u].size());
            double* o = &out[u * dim];
            for (auto v : rows[u]) {
                const double* x = &in[static_cast<std::size_t>(v) * dim];
                for (std::size_t k = 0; k < dim; ++k) o[k] += w * x[k];
            }
        }
    }

    // out = A^T * in.
    void backward(const std::vector<double>& in, std::vector<double>& out, std::size_t dim) const {
        out.assign(in.size(), 0.0);
        for (std::size_t u = 0; u < rows.size(); ++u) {
            const double w = 1.0 / static_cast<double>(rows[u].size());
            const double* g = &in[u * dim];
            for (auto v : rows[u]) {
                double* o = &out[static_cast<std::size_t>(v) * dim];
                for (std::size_t k = 0; k < dim; ++k) o[k] += w * g[k];
            }
        }
    }
};

inline double distance(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace detail

// Sum of hinge terms over the samples and its gradient with respect to the
// free vectors `x` (source rows first, then target rows).
inline double margin_loss_and_gradient(const detail::Aggregator& agg, std::size_t source_count, std::size_t dim,
                                       int rounds, double margin, const std::vector<double>& x,
                                       std::span<const MarginSample> samples, std::vector<double>* grad) {
    std::vector<double> h = x, tmp;
    for (int l = 0; l < rounds; ++l) {
        agg.forward(h, tmp, dim);
        std::swap(h, tmp);
    }
    std::vector<double> gh;
    if (grad) gh.assign(h.size(), 0.0);
    double loss = 0.0;
    auto row = [&](EntityId e, bool target) { return (target ? source_count + e : e) * dim; };
    for (const auto& smp : samples) {
        const std::size_t ps = row(smp.source, false), pt = row(smp.target, true);
        const std::size_t ns = row(smp.neg_source, false), nt = row(smp.neg_target, true);
        const double dp = detail::distance(&h[ps], &h[pt], dim);
        const double dn = detail::distance(&h[ns], &h[nt], dim);
        const double v = margin + dp - dn;
        if (v <= 0.0) continue;
        loss += v;
        if (!grad) continue;
        if (dp > 0.0) {
            for (std::size_t k = 0; k < dim; ++k) {
                const double g = (h[ps + k] - h[pt + k]) / dp;
                gh[ps + k] += g;
                gh[pt + k] -= g;
            }
        }
        if (dn > 0.0) {
            for (std::size_t k = 0; k < dim; ++k) {
                const double g = (h[ns + k] - h[nt + k]) / dn;
                gh[ns + k] -= g;
                gh[nt + k] += g;
            }
        }
    }
    if (grad) {
        for (int l = 0; l < rounds; ++l) {
            agg.backward(gh, tmp, dim);
            std::swap(gh, tmp);
        }
        *grad = std::move(gh);
    }
    return loss;
}

class EmbeddingMatcher : public Matcher {
public:
    EmbeddingMatcher() = default;

    double score(EntityId s, EntityId t) const override {
        return -detail::distance(&h_[s * dim_], &h_[(n_ + t) * dim_], dim_);
    }
    std::size_t source_count() const override { return n_; }
    std::size_t target_count() const override { return m_; }
    std::size_t dim() const { return dim_; }

    // Aggregated representation of a source (or target) entity.
    std::span<const double> embedding(EntityId e, bool target) const {
        return {&h_[((target ? n_ : 0) + e) * dim_], dim_};
    }

    double initial_positive_distance() const { return initial_pos_; }
    double final_positive_distance() const { return final_pos_; }
    const std::vector<double>& epoch_losses() const { return losses_; }

    static EmbeddingMatcher train(const MatcherConfig& cfg, const KgPair& pair, const LabelSet& labels);

private:
    std::size_t n_ = 0, m_ = 0, dim_ = 0;
    std::vector<double> h_;
    double initial_pos_ = 0.0, final_pos_ = 0.0;
    std::vector<double> losses_;
};

inline EmbeddingMatcher EmbeddingMatcher::train(const MatcherConfig& cfg, const KgPair& pair, const LabelSet& labels) {
    cfg.validate();
    if (labels.empty()) throw ConfigError("matcher: cannot train on an empty label set");
    const std::size_t n = pair.source.entity_count(), m = pair.target.entity_count();
    for (const auto& l : labels) {
        if (l.source >= n || l.target >= m) throw DataError("matcher: label references an unknown entity");
    }
    const std::size_t d = cfg.dim;
    const auto agg = detail::Aggregator::build(pair);

    Rng rng(cfg.seed);
    Rng init = rng.fork(1), neg = rng.fork(2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> x((n + m) * d);
    std::vector<char> labeled(n + m, 0);
    for (const auto& l : labels) labeled[l.source] = labeled[n + l.target] = 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = (labeled[i / d] ? scale : scale * cfg.free_scale) * init.normal();
    }
    if (cfg.tie_seeds) {
        for (const auto& l : labels) {
            std::copy_n(&x[l.source * d], d, &x[(n + l.target) * d]);
        }
    }

    auto mean_positive = [&](const std::vector<double>& xs) {
        std::vector<double> h = xs, tmp;
        for (int r = 0; r < cfg.rounds; ++r) {
            agg.forward(h, tmp, d);
            std::swap(h, tmp);
        }
        double sum = 0.0;
        for (const auto& l : labels) sum += detail::distance(&h[l.source * d], &h[(n + l.target) * d], d);
        return sum / static_cast<double>(labels.size());
    };

    EmbeddingMatcher out;
    out.initial_pos_ = mean_positive(x);

    std::vector<MarginSample> samples;
    std::vector<double> grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        samples.clear();
        for (const auto& l : labels) {
            for (std::size_t j = 0; j < cfg.negatives; ++j) {
                MarginSample s{l.source, l.target, l.source, l.target};
                if (j % 2 == 0 && m > 1) {
                    EntityId t = static_cast<EntityId>(neg.index(m - 1));
                    s.neg_target = t >= l.target ? t + 1 : t;
                } else if (n > 1) {
                    EntityId e = static_cast<EntityId>(neg.index(n - 1));
                    s.neg_source = e >= l.source ? e + 1 : e;
                } else {
                    continue;
                }
                samples.push_back(s);
            }
        }
        const double loss = margin_loss_and_gradient(agg, n, d, cfg.rounds, cfg.margin, x, samples, &grad);
        out.losses_.push_back(samples.empty() ? 0.0 : loss / static_cast<double>(samples.size()));
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= cfg.learning_rate * grad[i];
    }

    out.final_pos_ = mean_positive(x);
    out.n_ = n;
    out.m_ = m;
    out.dim_ = d;
    std::vector<double> tmp;
    out.h_ = std::move(x);
    for (int r = 0; r < cfg.rounds; ++r) {
        agg.forward(out.h_, tmp, d);
        std::swap(out.h_, tmp);
    }
    return out;
}

inline EmbeddingMatcher train(const MatcherConfig& cfg, const KgPair& pair, const LabelSet& labels) {
    return EmbeddingMatcher::train(cfg, pair, labels);
}

// ---------------------------------------------------------------------------
// Confident pairs and metrics

// Mutual top-1 pairs; argmax ties go to the smaller id.
inline std::vector<EntityPair> confident_pairs(const ScoreMatrix& sm) {
    std::vector<std::size_t> row_best(sm.rows, 0), col_best(sm.cols, 0);
    for (std::size_t s = 0; s < sm.rows; ++s) {
        for (std::size_t t = 1; t < sm.cols; ++t) {
            if (sm.at(s, t) > sm.at(s, row_best[s])) row_best[s] = t;
        }
    }
    for (std::size_t t = 0; t < sm.cols; ++t) {
        for (std::size_t s = 1; s < sm.rows; ++s) {
            if (sm.at(s, t) > sm.at(col_best[t], t)) col_best[t] = s;
        }
    }
    std::vector<EntityPair> out;
    if (sm.cols == 0) return out;
    for (std::size_t s = 0; s < sm.rows; ++s) {
        if (col_best[row_best[s]] == s) out.push_back({static_cast<EntityId>(s), static_cast<EntityId>(row_best[s])});
    }
    return out;
}

inline std::vector<EntityPair> confident_pairs(const Matcher& m) { return confident_pairs(m.score_matrix()); }

struct EvalReport {
    double hit1 = 0.0;
    double hit10 = 0.0;
    double mrr = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

// Ranks count every competitor scoring at least as high as the truth.
inline EvalReport evaluate(const ScoreMatrix& sm, const std::vector<EntityPair>& truth) {
    if (truth.empty()) throw ConfigError("evaluate: truth is empty");
    double h1 = 0.0, h10 = 0.0, rr = 0.0;
    for (auto [s, t] : truth) {
        if (s >= sm.rows || t >= sm.cols) throw DataError("evaluate: truth references an unknown entity");
        const double v = sm.at(s, t);
        std::size_t rank_s = 1, rank_t = 1;
        for (std::size_t c = 0; c < sm.cols; ++c) {
            if (c != t && sm.at(s, c) >= v) ++rank_s;
        }
        for (std::size_t r = 0; r < sm.rows; ++r) {
            if (r != s && sm.at(r, t) >= v) ++rank_t;
        }
        for (std::size_t rank : {rank_s, rank_t}) {
            if (rank <= 1) h1 += 1.0;
            if (rank <= 10) h10 += 1.0;
            rr += 1.0 / static_cast<double>(rank);
        }
    }
    const double denom = 2.0 * static_cast<double>(truth.size());
    return {h1 / denom, h10 / denom, rr / denom, std::nullopt, std::nullopt, std::nullopt};
}

inline EvalReport evaluate(const Matcher& m, const std::vector<EntityPair>& truth) {
    return evaluate(m.score_matrix(), truth);
}

struct ConfidentEval {
    std::optional<double> precision;
    double recall = 0.0;
    std::optional<double> f1;
};

// F1 is absent whenever precision is, and 0 when both rates are 0.
inline ConfidentEval evaluate_confident(const std::vector<EntityPair>& pairs, const std::vector<EntityPair>& truth) {
    std::vector<EntityPair> a = pairs, b = truth;
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    std::vector<EntityPair> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    ConfidentEval e;
    const double hit = static_cast<double>(both.size());
    if (!a.empty()) e.precision = hit / static_cast<double>(a.size());
    if (!b.empty()) e.recall = hit / static_cast<double>(b.size());
    if (e.precision) e.f1 = (*e.precision + e.recall) > 0.0 ? 2.0 * *e.precision * e.recall / (*e.precision + e.recall) : 0.0;
    return e;
}

// ---------------------------------------------------------------------------
// Dumps

// Text header line "kgalign-embeddings <sources> <targets> <dim>\n", then
// little-endian f32 rows, sources first.
inline void write_embeddings(const EmbeddingMatcher& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "kgalign-embeddings " << m.source_count() << ' ' << m.target_count() << ' ' << m.dim() << '\n';
    auto put = [&](std::span<const double> v) {
        for (double x : v) {
            const float f = static_cast<float>(x);
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof bits);
            const unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                        static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
    };
    for (EntityId e = 0; e < m.source_count(); ++e) put(m.embedding(e, false));
    for (EntityId e = 0; e < m.target_count(); ++e) put(m.embedding(e, true));
}

// CSV: source_id,rank,target_id,score for the top-k targets of each source.
inline void write_topk_csv(const ScoreMatrix& sm, std::size_t k, std::ostream& out) {
    out << "source_id,rank,target_id,score\n" << std::setprecision(8);
    std::vector<std::size_t> order(sm.cols);
    for (std::size_t s = 0; s < sm.rows; ++s) {
        for (std::size_t t = 0; t < sm.cols; ++t) order[t] = t;
        const std::size_t top = std::min(k, sm.cols);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (sm.at(s, a) != sm.at(s, b)) return sm.at(s, a) > sm.at(s, b);
                              return a < b;
                          });
        for (std::size_t i = 0; i < top; ++i) out << s << ',' << i + 1 << ',' << order[i] << ',' << sm.at(s, order[i]) << '\n';
    }
}

}  // namespace kgalign
