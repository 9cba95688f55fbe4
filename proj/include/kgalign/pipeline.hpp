#pragma once
// The iterative loop: select -> annotate -> refine -> train -> feedback.

#include <chrono>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgalign/annotator.hpp"
#include "kgalign/config.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/labels.hpp"
#include "kgalign/llm.hpp"
#include "kgalign/matcher.hpp"
#include "kgalign/reasoning.hpp"
#include "kgalign/refiner.hpp"
#include "kgalign/selector.hpp"
#include "kgalign/synth.hpp"

namespace kgalign {

struct IterationReport {
    int iteration = 0;
    std::size_t selected = 0;
    std::size_t queries = 0;
    std::size_t cumulative_queries = 0;
    std::size_t tokens = 0;
    std::size_t labels = 0;   // accumulated |L|
    std::size_t refined = 0;  // |L*|
    std::optional<double> label_tpr;
    std::optional<double> refined_tpr;
    std::optional<double> refined_recall;
    std::optional<double> hit1;
    std::optional<double> hit10;
    std::optional<double> mrr;
    std::size_t confident = 0;
    std::optional<double> seconds;
};

struct RunReport {
    std::string variant;
    std::string backend;
    std::uint64_t seed = 0;
    std::size_t source_entities = 0;
    std::size_t target_entities = 0;
    std::size_t budget = 0;
    std::size_t spent_queries = 0;
    std::size_t spent_tokens = 0;
    std::vector<IterationReport> iterations;
    std::vector<EntityId> annotated;  // in annotation order
    std::optional<std::string> error;

    const IterationReport* last() const { return iterations.empty() ? nullptr : &iterations.back(); }
};

// Per-iteration query allotments: floor(B/n) each, remainder on the last.
inline std::vector<std::size_t> split_budget(std::size_t budget, int iterations) {
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    const auto n = static_cast<std::size_t>(iterations);
    std::vector<std::size_t> out(n, budget / n);
    out.back() += budget % n;
    return out;
}

inline std::size_t total_budget(const RunConfig& cfg, std::size_t source_entities) {
    const auto b = static_cast<std::size_t>(cfg.budget_fraction * static_cast<double>(source_entities));
    if (b == 0) throw ConfigError("query budget is 0 (budget_fraction * |E| < 1)");
    return b;
}

inline KgPair load_pair(const RunConfig& cfg, std::vector<std::string>* warnings = nullptr) {
    if (!cfg.data.empty()) return load_openea(cfg.data);
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.synth_seed.value_or(cfg.seed);
    return synth_pair(spec, warnings);
}

inline std::unique_ptr<AnnotatorBackend> make_backend(const RunConfig& cfg, const KgPair& pair) {
    switch (cfg.backend) {
        case BackendKind::oracle: return std::make_unique<OracleBackend>(pair);
        case BackendKind::noisy_oracle:
            return std::make_unique<NoisyOracleBackend>(pair, cfg.p_true, mix_seed(cfg.seed, 0x6e6f697379ULL));
        case BackendKind::llm: return std::make_unique<LlmBackend>(cfg.llm, pair);
    }
    throw ConfigError("unknown backend");
}

// Raised when a run breaks its own budget contract; never expected.
class BudgetViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline RunReport run(const RunConfig& cfg, const KgPair& pair, AnnotatorBackend& backend) {
    cfg.validate();
    using clock = std::chrono::steady_clock;
    const std::size_t n_src = pair.source.entity_count();
    const std::size_t B = total_budget(cfg, n_src);
    const auto allot = split_budget(B, cfg.iterations);
    const auto truth_map = pair.has_truth() ? std::optional(pair.truth_map()) : std::nullopt;
    const SelectionStrategy strategy = strategy_for(cfg.variant);

    RunReport report;
    report.variant = to_string(cfg.variant);
    report.backend = backend.name();
    report.seed = cfg.seed;
    report.source_entities = n_src;
    report.target_entities = pair.target.entity_count();
    report.budget = B;

    Budget budget(B, cfg.max_tokens);
    std::optional<LabelCache> cache;
    if (!cfg.label_cache.empty()) cache.emplace(cfg.label_cache);
    Rng select_rng(mix_seed(cfg.seed, 0x73656c656374ULL));

    std::vector<char> annotated(n_src, 0);
    AlignmentState state = AlignmentState::empty(pair);
    LabelSet labels;

    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto t0 = clock::now();
        IterationReport ir;
        ir.iteration = it;
        const std::size_t spent_before = budget.spent_queries();
        const std::size_t tokens_before = budget.spent_tokens();

        // (1) select
        const std::size_t want = allot[static_cast<std::size_t>(it - 1)];
        std::vector<EntityId> sources;
        if (want > 0) sources = select_sources(pair, state, annotated, want, strategy, select_rng);
        ir.selected = sources.size();

        // (2) annotate
        BatchOptions opts;
        opts.prompt_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(it));
        opts.cache = cache ? &*cache : nullptr;
        BatchResult batch = annotate_batch(backend, sources, pair, cfg.k, budget, opts);
        for (const auto& a : batch.annotations) {
            if (annotated[a.source]) throw BudgetViolation("source " + std::to_string(a.source) + " annotated twice");
            annotated[a.source] = 1;
            report.annotated.push_back(a.source);
        }
        labels = normalize([&] {
            LabelSet all = labels;
            all.insert(all.end(), batch.labels.begin(), batch.labels.end());
            return all;
        }());
        ir.queries = budget.spent_queries() - spent_before;
        ir.cumulative_queries = budget.spent_queries();
        ir.tokens = budget.spent_tokens() - tokens_before;
        ir.labels = labels.size();
        if (budget.spent_queries() > B) throw BudgetViolation("spent queries exceed the budget");
        if (batch.error) {
            report.error = *batch.error;
            if (cfg.timing) ir.seconds = std::chrono::duration<double>(clock::now() - t0).count();
            report.iterations.push_back(ir);
            break;
        }

        // (3) refine
        LabelSet train_on;
        if (cfg.variant == Variant::no_refiner) {
            train_on = labels;
            state = seed(AlignmentState::empty(pair), pairs_of(labels), cfg.refiner.delta0);
        } else if (!labels.empty()) {
            RefineResult rr = refine(labels, pair, cfg.refiner);
            train_on = std::move(rr.refined);
            state = std::move(rr.state);
            if (truth_map && !rr.trace.points.empty()) ir.refined_recall = rr.trace.points.back().recall;
        }
        ir.refined = train_on.size();
        if (truth_map) {
            ir.label_tpr = true_positive_rate(labels, *truth_map);
            ir.refined_tpr = true_positive_rate(train_on, *truth_map);
        }

        // (4) train, (5) feedback
        if (!train_on.empty()) {
            MatcherConfig mc = cfg.matcher;
            mc.seed = mix_seed(cfg.seed, 0x6d61746368ULL + static_cast<std::uint64_t>(it));
            const EmbeddingMatcher matcher = EmbeddingMatcher::train(mc, pair, train_on);
            const ScoreMatrix sm = matcher.score_matrix();
            if (pair.has_truth() && !pair.truth->empty()) {
                const EvalReport ev = evaluate(sm, *pair.truth);
                ir.hit1 = ev.hit1;
                ir.hit10 = ev.hit10;
                ir.mrr = ev.mrr;
            }
            const auto confident = confident_pairs(sm);
            ir.confident = confident.size();
            state = seed(std::move(state), confident, cfg.refiner.delta0);
            state = reasoning_round(state, pair, cfg.refiner.reasoning());
        }
        if (cfg.timing) ir.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        report.iterations.push_back(ir);
    }

    report.spent_queries = budget.spent_queries();
    report.spent_tokens = budget.spent_tokens();
    if (report.spent_queries > B) throw BudgetViolation("spent queries exceed the budget");
    if (!report.error && !cfg.max_tokens && n_src >= B && report.spent_queries != B) {
        throw BudgetViolation("budget not fully spent although the pool sufficed");
    }
    return report;
}

inline RunReport run(const RunConfig& cfg, const KgPair& pair) {
    cfg.validate();
    auto backend = make_backend(cfg, pair);
    return run(cfg, pair, *backend);
}

inline RunReport run(const RunConfig& cfg) {
    cfg.validate();
    const KgPair pair = load_pair(cfg);
    return run(cfg, pair);
}

inline RunReport ablate(RunConfig cfg, Variant variant) {
    cfg.variant = variant;
    return run(cfg);
}

inline RunReport ablate(RunConfig cfg, const KgPair& pair, Variant variant) {
    cfg.variant = variant;
    return run(cfg, pair);
}

// ---------------------------------------------------------------------------
// Report output

namespace detail {

inline void put_opt(std::ostream& out, const std::optional<double>& v) {
    if (v) out << *v;
}

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace detail

// One row per iteration; undefined values are empty cells.
inline void write_report_csv(const RunReport& r, std::ostream& out) {
    const bool timed = !r.iterations.empty() && r.iterations.front().seconds.has_value();
    out << "iter,selected,queries,cumulative_queries,tokens,labels,refined,label_tpr,refined_tpr,refined_recall,"
           "hit1,hit10,mrr,confident";
    if (timed) out << ",seconds";
    out << '\n' << std::setprecision(6);
    for (const auto& it : r.iterations) {
        out << it.iteration << ',' << it.selected << ',' << it.queries << ',' << it.cumulative_queries << ','
            << it.tokens << ',' << it.labels << ',' << it.refined << ',';
        detail::put_opt(out, it.label_tpr);
        out << ',';
        detail::put_opt(out, it.refined_tpr);
        out << ',';
        detail::put_opt(out, it.refined_recall);
        out << ',';
        detail::put_opt(out, it.hit1);
        out << ',';
        detail::put_opt(out, it.hit10);
        out << ',';
        detail::put_opt(out, it.mrr);
        out << ',' << it.confident;
        if (timed) {
            out << ',';
            detail::put_opt(out, it.seconds);
        }
        out << '\n';
    }
}

inline nlohmann::json report_json(const RunReport& r) {
    nlohmann::json j;
    j["variant"] = r.variant;
    j["backend"] = r.backend;
    j["seed"] = r.seed;
    j["source_entities"] = r.source_entities;
    j["target_entities"] = r.target_entities;
    j["budget"] = r.budget;
    j["spent_queries"] = r.spent_queries;
    j["spent_tokens"] = r.spent_tokens;
    j["iterations"] = r.iterations.size();
    if (const auto* last = r.last()) {
        j["labels"] = last->labels;
        j["refined"] = last->refined;
        j["label_tpr"] = detail::opt_json(last->label_tpr);
        j["refined_tpr"] = detail::opt_json(last->refined_tpr);
        j["hit1"] = detail::opt_json(last->hit1);
        j["hit10"] = detail::opt_json(last->hit10);
        j["mrr"] = detail::opt_json(last->mrr);
    }
    j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json();
    return j;
}

inline std::string report_csv_string(const RunReport& r) {
    std::ostringstream os;
    write_report_csv(r, os);
    return os.str();
}

}  // namespace kgalign
