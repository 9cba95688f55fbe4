#pragma once
// Greedy label refinement driven by probabilistic reasoning.
//
// Each iteration runs one reasoning round, admits labels whose probability
// exceeds delta0, drops admitted labels that are not the best match on both
// sides, and raises the survivors to at least delta1. The output is the
// surviving set, optionally augmented with mutually best stored pairs above
// delta1.

#include <algorithm>
#include <iomanip>
#include <optional>
#include <ostream>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/labels.hpp"
#include "kgalign/reasoning.hpp"

namespace kgalign {

struct RefinerConfig {
    double delta0 = 0.5;
    double delta1 = 0.9;
    int iterations = 10;
    double theta_min = 1e-4;
    // Add stored pairs with P > delta1 to the result (tagged inferred).
    bool augment_inferred = true;
    // Start with every label admitted instead of an empty set.
    bool seed_admit = true;

    void validate() const {
        if (!(delta0 > 0.0 && delta0 < 1.0)) throw ConfigError("delta0 must lie in (0, 1)");
        if (!(delta1 > delta0 && delta1 < 1.0)) throw ConfigError("delta1 must lie in (delta0, 1)");
        if (iterations < 1) throw ConfigError("refiner iterations must be >= 1");
        if (!(theta_min >= 0.0 && theta_min < 1.0)) throw ConfigError("theta_min must lie in [0, 1)");
    }
    ReasoningConfig reasoning() const { return {iterations, theta_min}; }
};

struct TracePoint {
    int iteration = 0;
    std::size_t size = 0;
    std::optional<double> tpr;
    std::optional<double> recall;
    std::size_t phi = 0;
    std::vector<EntityPair> members;
};

struct RefinerTrace {
    std::vector<TracePoint> points;
};

struct RefineResult {
    LabelSet refined;
    AlignmentState state;
    RefinerTrace trace;

    LabelSet annotated() const {
        LabelSet out;
        for (const auto& l : refined) {
            if (l.provenance == Provenance::annotated) out.push_back(l);
        }
        return out;
    }
};

// Number of (label, side) pairs where the label is not the best match of its
// entity. Ties are not counted.
inline std::size_t incompatibility(std::span<const EntityPair> labels, const AlignmentState& state) {
    std::size_t phi = 0;
    for (auto [s, t] : labels) {
        const double p = state.prob(s, t);
        if (p < state.prob_of_target(t)) ++phi;
        if (p < state.prob_of(s)) ++phi;
    }
    return phi;
}

inline std::size_t incompatibility(const LabelSet& labels, const AlignmentState& state) {
    const auto pairs = pairs_of(labels);
    return incompatibility(std::span<const EntityPair>(pairs), state);
}

// TPR = |A ∩ L'| / |L'| and recall = |A ∩ L'| / |A ∩ L| for one iteration.
inline std::pair<std::optional<double>, std::optional<double>> tpr_recall(
    const std::vector<EntityPair>& members, const LabelSet& labels, const std::vector<std::int64_t>& truth) {
    std::optional<double> tpr, recall;
    const std::size_t hit = count_correct(members, truth);
    if (!members.empty()) tpr = static_cast<double>(hit) / static_cast<double>(members.size());
    const std::size_t reachable = count_correct(pairs_of(labels), truth);
    if (reachable > 0) recall = static_cast<double>(hit) / static_cast<double>(reachable);
    return {tpr, recall};
}

// Per-iteration (TPR, recall) of a trace against the ground truth.
inline std::vector<std::pair<std::optional<double>, std::optional<double>>> trace_against_truth(
    const RefinerTrace& trace, const LabelSet& labels, const std::vector<EntityPair>& truth,
    std::size_t source_count) {
    std::vector<std::int64_t> map(source_count, -1);
    for (auto [s, t] : truth) {
        if (s < source_count) map[s] = t;
    }
    std::vector<std::pair<std::optional<double>, std::optional<double>>> out;
    for (const auto& p : trace.points) out.push_back(tpr_recall(p.members, labels, map));
    return out;
}

inline RefineResult refine(const LabelSet& input, const KgPair& pair, const RefinerConfig& cfg = {}) {
    cfg.validate();
    const ReasoningConfig rc = cfg.reasoning();
    LabelSet labels;
    for (const auto& l : normalize(input)) labels.push_back({l.source, l.target, Provenance::annotated});
    const auto pairs = pairs_of(labels);
    const auto truth = pair.has_truth() ? std::optional(pair.truth_map()) : std::nullopt;

    AlignmentState state = seed(AlignmentState::empty(pair), pairs, cfg.delta0);
    state = update_subrel_probs(state, pair, rc);

    std::vector<char> admitted(labels.size(), cfg.seed_admit ? 1 : 0);
    RefinerTrace trace;
    auto record = [&](int iteration) {
        TracePoint pt;
        pt.iteration = iteration;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (admitted[i]) pt.members.push_back(pairs[i]);
        }
        pt.size = pt.members.size();
        pt.phi = incompatibility(std::span<const EntityPair>(pt.members), state);
        if (truth) std::tie(pt.tpr, pt.recall) = tpr_recall(pt.members, labels, *truth);
        trace.points.push_back(std::move(pt));
    };
    record(0);

    for (int it = 1; it <= cfg.iterations; ++it) {
        state = reasoning_round(state, pair, rc);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (state.prob(pairs[i].first, pairs[i].second) > cfg.delta0) admitted[i] = 1;
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (!admitted[i]) continue;
            const auto [s, t] = pairs[i];
            const double p = state.prob(s, t);
            if (p < std::max(state.prob_of(s), state.prob_of_target(t))) admitted[i] = 0;
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (admitted[i]) state.raise(pairs[i].first, pairs[i].second, cfg.delta1);
        }
        record(it);
    }

    RefineResult result;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (admitted[i]) result.refined.push_back(labels[i]);
    }
    if (cfg.augment_inferred) {
        const auto in_input = [&](EntityPair p) { return std::binary_search(pairs.begin(), pairs.end(), p); };
        // Only mutual best matches not already decided by the loop above;
        // a removed label stays removed.
        for (const auto& sp : state.stored_pairs()) {
            if (!(sp.prob > cfg.delta1) || in_input({sp.source, sp.target})) continue;
            if (state.best_of_source[sp.source].partner != static_cast<std::int64_t>(sp.target) ||
                state.best_of_target[sp.target].partner != static_cast<std::int64_t>(sp.source)) {
                continue;
            }
            result.refined.push_back({sp.source, sp.target, Provenance::inferred});
        }
        result.refined = normalize(std::move(result.refined));
    }
    result.state = std::move(state);
    result.trace = std::move(trace);
    return result;
}

// CSV: iter,size_Lprime,tpr,recall,phi. Undefined rates are left empty.
inline void write_trace_csv(const RefinerTrace& trace, std::ostream& out) {
    out << "iter,size_Lprime,tpr,recall,phi\n";
    out << std::setprecision(6);
    for (const auto& p : trace.points) {
        out << p.iteration << ',' << p.size << ',';
        if (p.tpr) out << *p.tpr;
        out << ',';
        if (p.recall) out << *p.recall;
        out << ',' << p.phi << '\n';
    }
}

}  // namespace kgalign
