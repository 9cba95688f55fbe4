#pragma once
// Pseudo-label sets and the labels file format:
//   source_id<TAB>target_id[<TAB>annotated|inferred]

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"

namespace kgalign {

enum class Provenance { annotated, inferred };

inline const char* to_string(Provenance p) { return p == Provenance::annotated ? "annotated" : "inferred"; }

struct PseudoLabel {
    EntityId source;
    EntityId target;
    Provenance provenance = Provenance::annotated;

    EntityPair pair() const { return {source, target}; }
    friend bool operator==(const PseudoLabel&, const PseudoLabel&) = default;
};

using LabelSet = std::vector<PseudoLabel>;

// Sorts by (source, target) and drops repeated pairs, keeping the first
// provenance seen.
inline LabelSet normalize(LabelSet labels) {
    std::stable_sort(labels.begin(), labels.end(), [](const PseudoLabel& a, const PseudoLabel& b) {
        return a.pair() < b.pair();
    });
    labels.erase(std::unique(labels.begin(), labels.end(),
                             [](const PseudoLabel& a, const PseudoLabel& b) { return a.pair() == b.pair(); }),
                 labels.end());
    return labels;
}

inline std::vector<EntityPair> pairs_of(const LabelSet& labels) {
    std::vector<EntityPair> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(l.pair());
    return out;
}

inline LabelSet labels_from_pairs(const std::vector<EntityPair>& pairs,
                                  Provenance p = Provenance::annotated) {
    LabelSet out;
    out.reserve(pairs.size());
    for (auto [s, t] : pairs) out.push_back({s, t, p});
    return out;
}

// |pairs ∩ truth|, with truth given as a source -> target map (-1 = none).
inline std::size_t count_correct(const std::vector<EntityPair>& pairs, const std::vector<std::int64_t>& truth) {
    std::size_t n = 0;
    for (auto [s, t] : pairs) {
        if (s < truth.size() && truth[s] == static_cast<std::int64_t>(t)) ++n;
    }
    return n;
}

inline std::optional<double> true_positive_rate(const LabelSet& labels, const std::vector<std::int64_t>& truth) {
    if (labels.empty()) return std::nullopt;
    return static_cast<double>(count_correct(pairs_of(labels), truth)) / static_cast<double>(labels.size());
}

inline LabelSet read_labels(const std::filesystem::path& path, const KgPair& pair) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open labels file " + path.string());
    LabelSet out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = detail::split_tabs(line);
        const std::string where = path.filename().string() + ":" + std::to_string(lineno);
        if (f.size() != 2 && f.size() != 3) throw DataError(where + ": expected 2 or 3 tab-separated fields");
        PseudoLabel l{};
        try {
            std::size_t used = 0;
            const unsigned long s = std::stoul(f[0], &used);
            if (used != f[0].size()) throw std::invalid_argument("trailing");
            const unsigned long t = std::stoul(f[1], &used);
            if (used != f[1].size()) throw std::invalid_argument("trailing");
            l.source = static_cast<EntityId>(s);
            l.target = static_cast<EntityId>(t);
        } catch (const std::exception&) {
            throw DataError(where + ": entity ids must be non-negative integers");
        }
        if (l.source >= pair.source.entity_count() || l.target >= pair.target.entity_count()) {
            throw DataError(where + ": entity id out of range");
        }
        if (f.size() == 3) {
            if (f[2] == "annotated") {
                l.provenance = Provenance::annotated;
            } else if (f[2] == "inferred") {
                l.provenance = Provenance::inferred;
            } else {
                throw DataError(where + ": unknown provenance '" + f[2] + "'");
            }
        }
        out.push_back(l);
    }
    return normalize(std::move(out));
}

inline void write_labels(const LabelSet& labels, std::ostream& out, bool with_provenance = true) {
    for (const auto& l : labels) {
        out << l.source << '\t' << l.target;
        if (with_provenance) out << '\t' << to_string(l.provenance);
        out << '\n';
    }
}

inline void write_labels(const LabelSet& labels, const std::filesystem::path& path, bool with_provenance = true) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_labels(labels, out, with_provenance);
}

}  // namespace kgalign
