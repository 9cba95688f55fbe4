#pragma once
// Pseudo-label production: candidate filtering by name similarity, prompt
// construction, budget accounting and pluggable answer backends.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/labels.hpp"
#include "kgalign/rng.hpp"

namespace kgalign {

// ---------------------------------------------------------------------------
// Name similarity

// UTF-8 to code points with simple case folding (ASCII, Latin-1, Greek,
// Cyrillic capitals). Invalid bytes decode as themselves.
inline std::u32string fold_name(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        char32_t cp = c;
        std::size_t len = 1;
        if (c >= 0xC0 && c < 0xE0 && i + 1 < s.size()) {
            cp = ((c & 0x1Fu) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
            len = 2;
        } else if (c >= 0xE0 && c < 0xF0 && i + 2 < s.size()) {
            cp = ((c & 0x0Fu) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
                 (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
            len = 3;
        } else if (c >= 0xF0 && i + 3 < s.size()) {
            cp = ((c & 0x07u) << 18) | ((static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
                 ((static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) | (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
            len = 4;
        }
        if ((cp >= U'A' && cp <= U'Z') || (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) ||
            (cp >= 0x391 && cp <= 0x3A9) || (cp >= 0x410 && cp <= 0x42F)) {
            cp += 0x20;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

// Levenshtein distance, two-row dynamic program.
inline std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// 1 - editdist / max length, on case-folded names.
inline double name_similarity(std::u32string_view a, std::u32string_view b) {
    const std::size_t m = std::max(a.size(), b.size());
    if (m == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(m);
}

inline double name_similarity(std::string_view a, std::string_view b) {
    return name_similarity(fold_name(a), fold_name(b));
}

struct Candidate {
    EntityId target;
    double similarity;
};

struct CandidateList {
    EntityId source = 0;
    std::vector<Candidate> candidates;

    bool contains(EntityId t) const {
        return std::any_of(candidates.begin(), candidates.end(), [&](const Candidate& c) { return c.target == t; });
    }
};

// Precomputes folded target names so repeated queries are cheap.
class CandidateFilter {
public:
    explicit CandidateFilter(const KgPair& pair) : pair_(&pair) {
        folded_.reserve(pair.target.entity_count());
        for (EntityId t = 0; t < pair.target.entity_count(); ++t) folded_.push_back(fold_name(pair.target.entity_name(t)));
    }

    // Top-k targets by similarity, descending, ties by ascending id.
    CandidateList operator()(EntityId source, std::size_t k) const {
        if (k == 0) throw ConfigError("candidate filter: k must be >= 1");
        if (folded_.empty()) throw DataError("candidate filter: target graph has no entities");
        const auto name = fold_name(pair_->source.entity_name(source));
        auto worse = [](const Candidate& a, const Candidate& b) {
            if (a.similarity != b.similarity) return a.similarity > b.similarity;
            return a.target < b.target;
        };
        std::vector<Candidate> heap;  // max-heap under `worse`: front is the weakest kept
        heap.reserve(k + 1);
        for (EntityId t = 0; t < folded_.size(); ++t) {
            if (heap.size() == k) {
                // length difference bounds the distance from below
                const std::size_t m = std::max(name.size(), folded_[t].size());
                const std::size_t diff = name.size() > folded_[t].size() ? name.size() - folded_[t].size()
                                                                         : folded_[t].size() - name.size();
                const double upper = m == 0 ? 1.0 : 1.0 - static_cast<double>(diff) / static_cast<double>(m);
                if (upper < heap.front().similarity) continue;
            }
            Candidate c{t, name_similarity(name, folded_[t])};
            if (heap.size() < k) {
                heap.push_back(c);
                std::push_heap(heap.begin(), heap.end(), worse);
            } else if (worse(c, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), worse);
                heap.back() = c;
                std::push_heap(heap.begin(), heap.end(), worse);
            }
        }
        std::sort(heap.begin(), heap.end(), worse);
        return {source, std::move(heap)};
    }

private:
    const KgPair* pair_;
    std::vector<std::u32string> folded_;
};

inline CandidateList filter_candidates(const KgPair& pair, EntityId source, std::size_t k) {
    return CandidateFilter(pair)(source, k);
}

// ---------------------------------------------------------------------------
// Prompts

// Forward triples incident to e, in (head, relation, tail) order.
inline std::vector<Triple> incident_triples(const KnowledgeGraph& kg, EntityId e) {
    std::vector<Triple> out;
    for (const Edge& edge : kg.out_edges(e)) {
        if (!kg.is_reversed(edge.relation)) out.push_back({e, edge.relation, edge.entity});
    }
    for (const Edge& edge : kg.in_edges(e)) {
        if (!kg.is_reversed(edge.relation) && edge.entity != e) out.push_back({edge.entity, edge.relation, e});
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Up to `count` incident triples drawn uniformly without replacement by a
// stream seeded from (seed, entity id); returned in draw order.
inline std::vector<Triple> sample_context(const KnowledgeGraph& kg, EntityId e, std::uint64_t seed,
                                          std::size_t count = 3) {
    const auto all = incident_triples(kg, e);
    Rng rng(mix_seed(seed, e));
    std::vector<Triple> out;
    for (auto i : rng.sample(all.size(), count)) out.push_back(all[i]);
    return out;
}

inline std::string render_triple(const KnowledgeGraph& kg, const Triple& t) {
    return "(" + kg.entity_name(t.head) + ", " + kg.relation_name(t.relation) + ", " + kg.entity_name(t.tail) + ")";
}

inline std::string build_prompt(const KgPair& pair, const CandidateList& candidates, std::uint64_t seed) {
    std::string p;
    p += "Two knowledge graphs describe overlapping sets of real-world entities.\n";
    p += "Find the entity in the second graph that is the same as the source entity.\n\n";
    p += "Source entity: " + pair.source.entity_name(candidates.source) + "\n";
    p += "Source context:\n";
    for (const auto& t : sample_context(pair.source, candidates.source, seed)) {
        p += "  " + render_triple(pair.source, t) + "\n";
    }
    p += "\nCandidates:\n";
    for (std::size_t i = 0; i < candidates.candidates.size(); ++i) {
        const EntityId t = candidates.candidates[i].target;
        p += std::to_string(i + 1) + ". " + pair.target.entity_name(t) + "\n";
        for (const auto& tr : sample_context(pair.target, t, seed ^ 0x5bd1e995ULL)) {
            p += "   " + render_triple(pair.target, tr) + "\n";
        }
    }
    p += "\nAnswer with exactly one candidate number, or NONE if no candidate is the same entity.\n";
    return p;
}

// Rough token count for budget accounting when a backend reports none.
inline std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

// ---------------------------------------------------------------------------
// Budget

class Budget {
public:
    explicit Budget(std::size_t max_queries, std::optional<std::size_t> max_tokens = std::nullopt)
        : max_queries_(max_queries), max_tokens_(max_tokens) {}

    std::size_t max_queries() const { return max_queries_; }
    std::optional<std::size_t> max_tokens() const { return max_tokens_; }
    std::size_t spent_queries() const { return spent_queries_; }
    std::size_t spent_tokens() const { return spent_tokens_; }
    std::size_t remaining_queries() const { return max_queries_ - spent_queries_; }

    // Whether one more query whose prompt costs about `tokens` fits.
    bool can_afford(std::size_t tokens = 0) const {
        if (spent_queries_ >= max_queries_) return false;
        if (max_tokens_ && spent_tokens_ + tokens > *max_tokens_) return false;
        return true;
    }

    void charge_query(std::size_t prompt_tokens = 0) {
        if (!can_afford(prompt_tokens)) throw BudgetExhausted("annotation budget exhausted");
        ++spent_queries_;
    }
    // Tokens are recorded as reported; the ceiling is enforced before each
    // query, so a reply can push the total past it by its own size at most.
    void charge_tokens(std::size_t tokens) { spent_tokens_ += tokens; }

private:
    std::size_t max_queries_;
    std::optional<std::size_t> max_tokens_;
    std::size_t spent_queries_ = 0;
    std::size_t spent_tokens_ = 0;
};

// ---------------------------------------------------------------------------
// Backends

struct Query {
    const CandidateList* candidates = nullptr;
    std::string prompt;
};

struct Reply {
    std::optional<EntityId> chosen;
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
    std::string note;
};

class AnnotatorBackend {
public:
    virtual ~AnnotatorBackend() = default;
    virtual std::string name() const = 0;
    virtual Reply ask(const Query& q) = 0;
    // Answers a batch; replies are in request order.
    virtual std::vector<Reply> ask_many(std::span<const Query> qs) {
        std::vector<Reply> out;
        out.reserve(qs.size());
        for (const auto& q : qs) out.push_back(ask(q));
        return out;
    }
    // Preferred number of requests in flight.
    virtual std::size_t parallelism() const { return 1; }
};

// Answers with the ground-truth counterpart when it is among the candidates.
class OracleBackend : public AnnotatorBackend {
public:
    explicit OracleBackend(std::vector<std::int64_t> truth) : truth_(std::move(truth)) {}
    explicit OracleBackend(const KgPair& pair) : truth_(pair.truth_map()) {
        if (!pair.has_truth()) throw ConfigError("oracle backend requires ground truth");
    }

    std::string name() const override { return "oracle"; }

    Reply ask(const Query& q) override {
        Reply r;
        r.tokens_in = estimate_tokens(q.prompt);
        r.tokens_out = 1;
        const auto& c = *q.candidates;
        const std::int64_t t = c.source < truth_.size() ? truth_[c.source] : -1;
        if (t >= 0 && c.contains(static_cast<EntityId>(t))) r.chosen = static_cast<EntityId>(t);
        return r;
    }

protected:
    std::vector<std::int64_t> truth_;
};

// With probability p_true behaves like the oracle; otherwise answers a
// uniformly random wrong candidate (NONE when there is none).
class NoisyOracleBackend : public OracleBackend {
public:
    NoisyOracleBackend(const KgPair& pair, double p_true, std::uint64_t seed)
        : OracleBackend(pair), p_true_(p_true), rng_(seed) {
        if (!(p_true >= 0.0 && p_true <= 1.0)) throw ConfigError("p_true must lie in [0, 1]");
    }
    NoisyOracleBackend(std::vector<std::int64_t> truth, double p_true, std::uint64_t seed)
        : OracleBackend(std::move(truth)), p_true_(p_true), rng_(seed) {
        if (!(p_true >= 0.0 && p_true <= 1.0)) throw ConfigError("p_true must lie in [0, 1]");
    }

    std::string name() const override { return "noisy-oracle"; }

    Reply ask(const Query& q) override {
        if (rng_.uniform() < p_true_) return OracleBackend::ask(q);
        Reply r;
        r.tokens_in = estimate_tokens(q.prompt);
        r.tokens_out = 1;
        const auto& c = *q.candidates;
        const std::int64_t t = c.source < truth_.size() ? truth_[c.source] : -1;
        std::vector<EntityId> wrong;
        for (const auto& cand : c.candidates) {
            if (static_cast<std::int64_t>(cand.target) != t) wrong.push_back(cand.target);
        }
        if (!wrong.empty()) r.chosen = wrong[rng_.index(wrong.size())];
        return r;
    }

private:
    double p_true_;
    Rng rng_;
};

// ---------------------------------------------------------------------------
// Label cache: source_id<TAB>target_id|NONE<TAB>tokens

class LabelCache {
public:
    struct Entry {
        std::optional<EntityId> target;
        std::size_t tokens = 0;
    };

    LabelCache() = default;
    explicit LabelCache(std::filesystem::path path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t lineno = 0;
        while (in && std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto f = detail::split_tabs(line);
            if (f.size() != 3) throw DataError("label cache line " + std::to_string(lineno) + ": expected 3 fields");
            try {
                Entry e;
                if (f[1] != "NONE") e.target = static_cast<EntityId>(std::stoul(f[1]));
                e.tokens = std::stoul(f[2]);
                entries_[static_cast<EntityId>(std::stoul(f[0]))] = e;
            } catch (const std::logic_error&) {
                throw DataError("label cache line " + std::to_string(lineno) + ": malformed");
            }
        }
    }

    std::optional<Entry> lookup(EntityId source) const {
        auto it = entries_.find(source);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    // Records an answer and appends it to the file, if any.
    void store(EntityId source, std::optional<EntityId> target, std::size_t tokens) {
        entries_[source] = {target, tokens};
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::app);
        if (!out) throw DataError("cannot append to label cache " + path_.string());
        out << source << '\t' << (target ? std::to_string(*target) : std::string("NONE")) << '\t' << tokens << '\n';
    }

    std::size_t size() const { return entries_.size(); }

private:
    std::filesystem::path path_;
    std::map<EntityId, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Annotation

struct Annotation {
    EntityId source = 0;
    std::optional<EntityId> chosen;
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
    std::string backend;
    std::string note;
    bool cached = false;
};

inline Annotation commit_reply(const Query& q, Reply r, const std::string& backend, Budget& budget) {
    Annotation a;
    a.source = q.candidates->source;
    a.backend = backend;
    a.tokens_in = r.tokens_in;
    a.tokens_out = r.tokens_out;
    a.note = std::move(r.note);
    if (r.chosen && q.candidates->contains(*r.chosen)) {
        a.chosen = r.chosen;
    } else if (r.chosen) {
        a.note = "answer outside candidate list";
    }
    budget.charge_tokens(a.tokens_in + a.tokens_out);
    return a;
}

// One query for one source. Raises BudgetExhausted when nothing is left.
inline Annotation annotate(AnnotatorBackend& backend, const CandidateList& candidates, Budget& budget,
                           std::string prompt = {}) {
    Query q{&candidates, std::move(prompt)};
    budget.charge_query(estimate_tokens(q.prompt));
    return commit_reply(q, backend.ask(q), backend.name(), budget);
}

struct BatchOptions {
    std::uint64_t prompt_seed = 0;
    LabelCache* cache = nullptr;
};

struct BatchResult {
    LabelSet labels;
    std::vector<Annotation> annotations;
    std::size_t skipped = 0;  // sources not queried for lack of budget
    std::optional<std::string> error;
};

// Queries each source in order until the budget runs out. NONE answers and
// parse failures spend budget but yield no label. Backend failures stop the
// batch; what was collected so far is returned with the error.
inline BatchResult annotate_batch(AnnotatorBackend& backend, std::span<const EntityId> sources, const KgPair& pair,
                                  std::size_t k, Budget& budget, const BatchOptions& opts = {}) {
    BatchResult result;
    if (sources.empty()) return result;
    const CandidateFilter filter(pair);
    std::size_t i = 0;
    const std::size_t width = std::max<std::size_t>(1, backend.parallelism());
    bool out_of_budget = false;
    while (i < sources.size() && !out_of_budget) {
        std::vector<CandidateList> lists;
        std::vector<Query> pending;
        std::vector<std::size_t> slots;  // position in `annotations` for each pending query
        // build one wave of up to `width` uncached queries
        while (i < sources.size() && pending.size() < width) {
            CandidateList c = filter(sources[i], k);
            std::string prompt = build_prompt(pair, c, opts.prompt_seed);
            if (!budget.can_afford(estimate_tokens(prompt))) {
                out_of_budget = true;
                break;
            }
            budget.charge_query(estimate_tokens(prompt));
            if (opts.cache) {
                if (auto hit = opts.cache->lookup(sources[i]); hit && (!hit->target || c.contains(*hit->target))) {
                    Annotation a;
                    a.source = sources[i];
                    a.chosen = hit->target;
                    a.backend = backend.name();
                    a.cached = true;
                    a.note = "cached";
                    result.annotations.push_back(a);
                    ++i;
                    continue;
                }
            }
            lists.push_back(std::move(c));
            pending.push_back({nullptr, std::move(prompt)});
            slots.push_back(result.annotations.size());
            result.annotations.emplace_back();
            ++i;
        }
        for (std::size_t j = 0; j < pending.size(); ++j) pending[j].candidates = &lists[j];
        if (!pending.empty()) {
            std::vector<Reply> replies;
            try {
                replies = backend.ask_many(pending);
            } catch (const BackendError& e) {
                result.error = e.what();
                result.annotations.resize(slots.front());
                break;
            }
            for (std::size_t j = 0; j < pending.size(); ++j) {
                Annotation a = commit_reply(pending[j], std::move(replies[j]), backend.name(), budget);
                if (opts.cache) opts.cache->store(a.source, a.chosen, a.tokens_in + a.tokens_out);
                result.annotations[slots[j]] = std::move(a);
            }
        }
    }
    result.skipped = sources.size() - result.annotations.size();
    for (const auto& a : result.annotations) {
        if (a.chosen) result.labels.push_back({a.source, *a.chosen, Provenance::annotated});
    }
    result.labels = normalize(std::move(result.labels));
    return result;
}

// ---------------------------------------------------------------------------
// Synthetic noisy label sets for refiner experiments

enum class NoiseScheme { fixed_budget, fixed_tp };

struct NoisyLabelSpec {
    NoiseScheme scheme = NoiseScheme::fixed_budget;
    double coverage = 0.1;       // fixed_budget: |L| = round(coverage * |truth|)
    double tpr = 0.5;            // fraction of correct labels
    std::size_t true_count = 0;  // fixed_tp: number of correct labels
    std::uint64_t seed = 1;
};

// Distinct sources drawn from the truth; the correct ones keep their
// counterpart, the rest get a uniformly random wrong target.
inline LabelSet noisy_label_set(const KgPair& pair, const NoisyLabelSpec& spec) {
    if (!pair.has_truth()) throw ConfigError("noisy labels require ground truth");
    if (!(spec.tpr > 0.0 && spec.tpr <= 1.0)) throw ConfigError("tpr must lie in (0, 1]");
    const auto& truth = *pair.truth;
    std::size_t total = 0, correct = 0;
    if (spec.scheme == NoiseScheme::fixed_budget) {
        total = static_cast<std::size_t>(std::llround(spec.coverage * static_cast<double>(truth.size())));
        correct = static_cast<std::size_t>(std::llround(spec.tpr * static_cast<double>(total)));
    } else {
        correct = spec.true_count;
        total = static_cast<std::size_t>(std::llround(static_cast<double>(correct) / spec.tpr));
    }
    total = std::min(total, truth.size());
    correct = std::min(correct, total);
    Rng rng(spec.seed);
    const auto picks = rng.sample(truth.size(), total);
    const std::size_t m = pair.target.entity_count();
    LabelSet out;
    for (std::size_t i = 0; i < picks.size(); ++i) {
        auto [s, t] = truth[picks[i]];
        if (i < correct || m < 2) {
            out.push_back({s, t});
        } else {
            EntityId w = static_cast<EntityId>(rng.index(m - 1));
            if (w >= t) ++w;
            out.push_back({s, w});
        }
    }
    return normalize(std::move(out));
}

}  // namespace kgalign
