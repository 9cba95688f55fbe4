// kgalign command-line front end.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 data error,
// 3 annotator backend error, 4 internal invariant violation.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "kgalign/kgalign.hpp"

using namespace kgalign;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// One subcommand. Settings are kept as strings and applied through the same
// key=value path as config files, so flags given on the command line
// override the file and nothing else does.
struct Command {
    CLI::App* app = nullptr;
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> settings;
    std::string config_path;
    bool json_out = false;

    void setting(const std::string& flag, const std::string& key, const std::string& help, const std::string& def) {
        CLI::Option* o = app->add_option(flag, values[key], help)->type_name("VALUE");
        if (!def.empty()) o->default_str(def);
        settings.emplace_back(key, o);
    }

    RunConfig config() const {
        RunConfig cfg = config_path.empty() ? RunConfig{} : read_config(config_path);
        for (const auto& [key, opt] : settings) {
            if (opt->count() > 0) apply_setting(cfg, key, values.at(key));
        }
        return cfg;
    }
};

void add_common(Command& c) {
    c.app->add_option("--config", c.config_path, "key=value config file; flags override it");
    c.setting("--seed", "seed", "random seed", "1");
    c.app->add_flag("--json", c.json_out, "print a JSON result as the final line");
}

void add_data(Command& c) {
    const SynthSpec s = standard_fixture(1);
    c.setting("--data", "data", "OpenEA directory (synthetic pair when omitted)", "");
    c.setting("--entities", "synth.entities", "synthetic entity count", std::to_string(s.entity_count));
    c.setting("--relations", "synth.relations", "synthetic relation count", std::to_string(s.relation_count));
    c.setting("--degree", "synth.degree", "synthetic mean degree", fmt(s.mean_degree));
    c.setting("--dropout", "synth.dropout", "synthetic target edge dropout", fmt(s.edge_dropout));
    c.setting("--name-noise", "synth.name_noise", "fraction of perturbed target names", fmt(s.name_noise));
    c.setting("--synth-seed", "synth.seed", "synthetic graph seed (defaults to --seed)", "");
}

void add_refiner(Command& c) {
    const RefinerConfig r;
    c.setting("--delta0", "delta0", "admission threshold", fmt(r.delta0));
    c.setting("--delta1", "delta1", "confidence floor for kept labels", fmt(r.delta1));
    c.setting("--refiner-iterations", "refiner_iterations", "refiner iterations n_lr", std::to_string(r.iterations));
    c.setting("--theta-min", "theta_min", "probability pruning threshold", fmt(r.theta_min));
    c.setting("--augment-inferred", "augment_inferred", "add inferred pairs above delta1", "true");
}

void add_matcher(Command& c) {
    const MatcherConfig m;
    c.setting("--dim", "matcher.dim", "embedding dimension", std::to_string(m.dim));
    c.setting("--epochs", "matcher.epochs", "training epochs", std::to_string(m.epochs));
    c.setting("--learning-rate", "matcher.learning_rate", "gradient step", fmt(m.learning_rate));
    c.setting("--margin", "matcher.margin", "hinge margin", fmt(m.margin));
    c.setting("--negatives", "matcher.negatives", "negatives per label", std::to_string(m.negatives));
    c.setting("--rounds", "matcher.rounds", "aggregation rounds", std::to_string(m.rounds));
}

void add_backend(Command& c) {
    const RunConfig d;
    c.setting("--backend", "backend", "annotator: oracle, noisy or llm", "oracle");
    c.setting("--p-true", "p_true", "noisy oracle accuracy", fmt(d.p_true));
    c.setting("--k", "k", "candidates per query", std::to_string(d.k));
    c.setting("--llm-url", "llm.url", "chat-completion endpoint", d.llm.url);
    c.setting("--llm-model", "llm.model", "model name", d.llm.model);
    c.setting("--llm-retries", "llm.retries", "retries per request", std::to_string(d.llm.retries));
    c.setting("--llm-parallelism", "llm.parallelism", "requests in flight", std::to_string(d.llm.parallelism));
    c.setting("--label-cache", "label_cache", "answer cache file", "");
    c.setting("--max-tokens", "max_tokens", "token ceiling", "");
}

void add_pipeline(Command& c) {
    const RunConfig d;
    c.setting("--budget", "budget_fraction", "query budget as a fraction of source entities", fmt(d.budget_fraction));
    c.setting("--iterations", "iterations", "pipeline iterations n", std::to_string(d.iterations));
    c.setting("--timing", "timing", "add wall time to reports", "false");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(); }

std::vector<char> mark(const LabelSet& labels, std::size_t n) {
    std::vector<char> out(n, 0);
    for (const auto& l : labels) out[l.source] = 1;
    return out;
}

// ---------------------------------------------------------------------------

int cmd_run(const Command& c, const std::string& report_path, const std::string& summary_path,
            const std::string& variant) {
    RunConfig cfg = c.config();
    if (!variant.empty()) cfg.variant = parse_variant(variant);
    const RunReport r = run(cfg);
    const std::string csv = report_csv_string(r);
    if (report_path.empty()) std::cout << csv;
    else write_text(report_path, csv);
    const json j = report_json(r);
    if (!summary_path.empty()) write_text(summary_path, j.dump(2) + "\n");
    if (r.error) std::cerr << "annotator failed: " << *r.error << "\n";
    if (c.json_out) std::cout << j.dump() << "\n";
    return r.error ? 3 : 0;
}

int cmd_ablate(const Command& c, const std::vector<std::string>& variants) {
    const RunConfig cfg = c.config();
    const KgPair pair = load_pair(cfg);
    std::vector<Variant> todo;
    for (const auto& v : variants) {
        if (v == "all") {
            for (const auto& [k, name] : variant_names()) todo.push_back(k);
        } else {
            todo.push_back(parse_variant(v));
        }
    }
    json all = json::array();
    int rc = 0;
    if (!c.json_out) std::cout << "variant,spent_queries,refined_tpr,hit1,hit10,mrr\n";
    for (Variant v : todo) {
        const RunReport r = ablate(cfg, pair, v);
        if (r.error) rc = 3;
        const auto* last = r.last();
        if (!c.json_out) {
            auto cell = [](const std::optional<double>& x) { return x ? fmt(*x) : std::string(); };
            std::cout << r.variant << ',' << r.spent_queries << ',' << (last ? cell(last->refined_tpr) : "") << ','
                      << (last ? cell(last->hit1) : "") << ',' << (last ? cell(last->hit10) : "") << ','
                      << (last ? cell(last->mrr) : "") << "\n";
        }
        all.push_back(report_json(r));
    }
    if (c.json_out) std::cout << json{{"variants", all}}.dump() << "\n";
    return rc;
}

int cmd_synth(const Command& c, const std::string& out) {
    RunConfig cfg = c.config();
    cfg.data.clear();
    std::vector<std::string> warnings;
    const KgPair pair = load_pair(cfg, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    save_openea(pair, out);
    const json j = {{"out", out},
                    {"source_entities", pair.source.entity_count()},
                    {"target_entities", pair.target.entity_count()},
                    {"source_triples", pair.source.forward_triple_count()},
                    {"target_triples", pair.target.forward_triple_count()},
                    {"links", pair.truth ? pair.truth->size() : 0},
                    {"warnings", warnings}};
    if (c.json_out) std::cout << j.dump() << "\n";
    else std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_refine(const Command& c, const std::string& labels_path, const std::string& out, const std::string& trace) {
    const RunConfig cfg = c.config();
    const KgPair pair = load_pair(cfg);
    const LabelSet labels = read_labels(labels_path, pair);
    const RefineResult r = refine(labels, pair, cfg.refiner);
    if (!out.empty()) write_labels(r.refined, std::filesystem::path(out));
    std::ostringstream csv;
    write_trace_csv(r.trace, csv);
    if (!trace.empty()) write_text(trace, csv.str());
    else if (!c.json_out) std::cout << csv.str();
    const TracePoint& last = r.trace.points.back();
    const json j = {{"input", normalize(labels).size()}, {"kept", r.annotated().size()},
                    {"refined", r.refined.size()},       {"phi", last.phi},
                    {"tpr", opt(last.tpr)},              {"recall", opt(last.recall)}};
    if (c.json_out) std::cout << j.dump() << "\n";
    return 0;
}

int cmd_select(const Command& c, const std::string& labels_path, std::size_t count, const std::string& strategy,
               const std::string& scores_path) {
    const RunConfig cfg = c.config();
    const KgPair pair = load_pair(cfg);
    LabelSet labels;
    AlignmentState state = AlignmentState::empty(pair);
    if (!labels_path.empty()) {
        labels = read_labels(labels_path, pair);
        state = refine(labels, pair, cfg.refiner).state;
    }
    const auto annotated = mark(labels, pair.source.entity_count());
    SelectionStrategy s = SelectionStrategy::combined;
    if (!strategy.empty() && strategy != "combined") s = strategy_for(parse_variant(strategy));
    Rng rng(mix_seed(cfg.seed, 0x73656c656374ULL));
    const auto picked = select_sources(pair, state, annotated, count, s, rng);
    if (!scores_path.empty()) {
        std::ofstream out(scores_path);
        if (!out) throw DataError("cannot write " + scores_path);
        write_scores_csv(score_entities(pair, state, annotated), pair.source, out);
    }
    if (c.json_out) {
        std::cout << json{{"selected", picked}}.dump() << "\n";
    } else {
        for (auto e : picked) std::cout << e << '\t' << pair.source.entity_name(e) << "\n";
    }
    return 0;
}

std::vector<EntityId> read_ids(const std::string& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sources file " + path);
    std::vector<EntityId> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto v = detail::parse_number<std::size_t>("sources", line.substr(0, line.find('\t')));
        if (v >= n) throw DataError(path + ":" + std::to_string(lineno) + ": entity id out of range");
        out.push_back(static_cast<EntityId>(v));
    }
    return out;
}

int cmd_annotate(const Command& c, const std::string& sources_path, std::size_t count, std::size_t queries,
                 const std::string& out) {
    const RunConfig cfg = c.config();
    const KgPair pair = load_pair(cfg);
    std::vector<EntityId> sources;
    if (!sources_path.empty()) {
        sources = read_ids(sources_path, pair.source.entity_count());
    } else {
        Rng rng(mix_seed(cfg.seed, 0x73656c656374ULL));
        sources = select_sources(pair, AlignmentState::empty(pair), {}, count, SelectionStrategy::combined, rng);
    }
    auto backend = make_backend(cfg, pair);
    Budget budget(queries > 0 ? queries : std::max<std::size_t>(sources.size(), 1), cfg.max_tokens);
    std::optional<LabelCache> cache;
    if (!cfg.label_cache.empty()) cache.emplace(cfg.label_cache);
    BatchOptions opts;
    opts.prompt_seed = mix_seed(cfg.seed, 1);
    opts.cache = cache ? &*cache : nullptr;
    const BatchResult r = annotate_batch(*backend, sources, pair, cfg.k, budget, opts);
    if (!out.empty()) write_labels(r.labels, std::filesystem::path(out));
    else if (!c.json_out) write_labels(r.labels, std::cout);
    std::optional<double> tpr;
    if (pair.has_truth()) tpr = true_positive_rate(r.labels, pair.truth_map());
    const json j = {{"backend", backend->name()},          {"queries", budget.spent_queries()},
                    {"tokens", budget.spent_tokens()},      {"labels", r.labels.size()},
                    {"skipped", r.skipped},                 {"tpr", opt(tpr)},
                    {"error", r.error ? json(*r.error) : json()}};
    if (r.error) std::cerr << "annotator failed: " << *r.error << "\n";
    if (c.json_out) std::cout << j.dump() << "\n";
    return r.error ? 3 : 0;
}

int cmd_eval(const Command& c, const std::string& labels_path, const std::string& emb, const std::string& topk,
             std::size_t topk_k) {
    const RunConfig cfg = c.config();
    const KgPair pair = load_pair(cfg);
    if (!pair.has_truth() || pair.truth->empty()) throw DataError("eval needs ground truth (ent_links)");
    const LabelSet labels = read_labels(labels_path, pair);
    MatcherConfig mc = cfg.matcher;
    mc.seed = mix_seed(cfg.seed, 0x6d61746368ULL);
    const EmbeddingMatcher m = EmbeddingMatcher::train(mc, pair, labels);
    const ScoreMatrix sm = m.score_matrix();
    const EvalReport ev = evaluate(sm, *pair.truth);
    const auto confident = confident_pairs(sm);
    const ConfidentEval ce = evaluate_confident(confident, *pair.truth);
    if (!emb.empty()) write_embeddings(m, emb);
    if (!topk.empty()) {
        std::ofstream out(topk);
        if (!out) throw DataError("cannot write " + topk);
        write_topk_csv(sm, topk_k, out);
    }
    const json j = {{"hit1", ev.hit1},          {"hit10", ev.hit10},          {"mrr", ev.mrr},
                    {"confident", confident.size()}, {"precision", opt(ce.precision)}, {"recall", ce.recall},
                    {"f1", opt(ce.f1)}};
    if (c.json_out) {
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "hit1 " << ev.hit1 << "\nhit10 " << ev.hit10 << "\nmrr " << ev.mrr << "\nconfident "
                  << confident.size() << "\n";
    }
    return 0;
}

int cmd_inspect(const Command& c) {
    const RunConfig cfg = c.config();
    const KgPair pair = load_pair(cfg);
    json j;
    for (const auto* side : {&pair.source, &pair.target}) {
        const KnowledgeGraph& kg = *side;
        json rels = json::array();
        for (RelationId r = 0; r < kg.base_relation_count(); ++r) {
            if (!kg.has_triples(r)) continue;
            rels.push_back({{"name", kg.relation_name(r)},
                            {"triples", kg.relation_triples(r).size()},
                            {"functionality", kg.functionality(r)},
                            {"inverse_functionality", kg.inverse_functionality(r)}});
        }
        std::size_t isolated = 0;
        for (EntityId e = 0; e < kg.entity_count(); ++e) isolated += kg.out_edges(e).empty() && kg.in_edges(e).empty();
        json g = {{"entities", kg.entity_count()},
                  {"relations", kg.base_relation_count()},
                  {"triples", kg.forward_triple_count()},
                  {"duplicates", kg.duplicate_count()},
                  {"isolated", isolated},
                  {"relation_stats", rels}};
        j[side == &pair.source ? "source" : "target"] = g;
    }
    j["links"] = pair.truth ? json(pair.truth->size()) : json();
    if (c.json_out) {
        std::cout << j.dump() << "\n";
        return 0;
    }
    for (const char* side : {"source", "target"}) {
        const auto& g = j[side];
        std::cout << side << ": " << g["entities"] << " entities, " << g["relations"] << " relations, "
                  << g["triples"] << " triples, " << g["isolated"] << " isolated\n";
        std::cout << "  relation\ttriples\tF\tF_inv\n";
        for (const auto& r : g["relation_stats"]) {
            std::cout << "  " << r["name"].get<std::string>() << '\t' << r["triples"] << '\t' << r["functionality"]
                      << '\t' << r["inverse_functionality"] << "\n";
        }
    }
    if (pair.truth) std::cout << "links: " << pair.truth->size() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entity alignment with budgeted, noisy annotation"};
    app.require_subcommand(1, 1);
    std::vector<std::unique_ptr<Command>> commands;
    auto make = [&](const std::string& name, const std::string& help) -> Command& {
        commands.push_back(std::make_unique<Command>());
        commands.back()->app = app.add_subcommand(name, help);
        add_common(*commands.back());
        return *commands.back();
    };

    std::string report_path, summary_path, run_variant;
    Command& run_cmd = make("run", "run the select/annotate/refine/train loop");
    add_data(run_cmd);
    add_pipeline(run_cmd);
    add_backend(run_cmd);
    add_refiner(run_cmd);
    add_matcher(run_cmd);
    run_cmd.app->add_option("--variant", run_variant, "pipeline variant")->default_str("full");
    run_cmd.app->add_option("--report", report_path, "per-iteration CSV (stdout when omitted)");
    run_cmd.app->add_option("--summary", summary_path, "JSON summary file");

    std::vector<std::string> variants;
    Command& ablate_cmd = make("ablate", "run pipeline variants on one pair");
    add_data(ablate_cmd);
    add_pipeline(ablate_cmd);
    add_backend(ablate_cmd);
    add_refiner(ablate_cmd);
    add_matcher(ablate_cmd);
    ablate_cmd.app
        ->add_option("--variant", variants,
                     "full, no-refiner, no-active, ur-only, nu-only, degree, funcSum, random-select or all")
        ->required()
        ->delimiter(',');

    std::string synth_out;
    Command& synth_cmd = make("synth", "write a synthetic pair in OpenEA layout");
    add_data(synth_cmd);
    synth_cmd.app->add_option("--out", synth_out, "output directory")->required();

    std::string refine_labels, refine_out, refine_trace;
    Command& refine_cmd = make("refine", "refine a noisy label file");
    add_data(refine_cmd);
    add_refiner(refine_cmd);
    refine_cmd.app->add_option("--labels", refine_labels, "labels file (source_id TAB target_id)")->required();
    refine_cmd.app->add_option("--out", refine_out, "refined labels file");
    refine_cmd.app->add_option("--trace", refine_trace, "trace CSV (stdout when omitted)");

    std::string select_labels, select_strategy, select_scores;
    std::size_t select_count = 10;
    Command& select_cmd = make("select", "rank unannotated source entities");
    add_data(select_cmd);
    add_refiner(select_cmd);
    select_cmd.app->add_option("--labels", select_labels, "labels already collected");
    select_cmd.app->add_option("--count", select_count, "entities to select")->capture_default_str();
    select_cmd.app->add_option("--strategy", select_strategy, "combined or a selector variant name")
        ->default_str("combined");
    select_cmd.app->add_option("--scores", select_scores, "uncertainty scores CSV");

    std::string annotate_sources, annotate_out;
    std::size_t annotate_count = 10, annotate_queries = 0;
    Command& annotate_cmd = make("annotate", "query the annotator for source entities");
    add_data(annotate_cmd);
    add_backend(annotate_cmd);
    annotate_cmd.app->add_option("--sources", annotate_sources, "source ids, one per line");
    annotate_cmd.app->add_option("--count", annotate_count, "sources to select when --sources is omitted")
        ->capture_default_str();
    annotate_cmd.app->add_option("--queries", annotate_queries, "query budget (default: one per source)");
    annotate_cmd.app->add_option("--out", annotate_out, "labels file (stdout when omitted)");

    std::string eval_labels, eval_emb, eval_topk;
    std::size_t eval_k = 10;
    Command& eval_cmd = make("eval", "train the matcher on labels and score it");
    add_data(eval_cmd);
    add_matcher(eval_cmd);
    eval_cmd.app->add_option("--labels", eval_labels, "training labels")->required();
    eval_cmd.app->add_option("--embeddings", eval_emb, "binary embedding dump");
    eval_cmd.app->add_option("--topk", eval_topk, "top-k CSV");
    eval_cmd.app->add_option("--topk-k", eval_k, "rows per source in the top-k CSV")->capture_default_str();

    Command& inspect_cmd = make("inspect", "print graph statistics");
    add_data(inspect_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*run_cmd.app) return cmd_run(run_cmd, report_path, summary_path, run_variant);
        if (*ablate_cmd.app) return cmd_ablate(ablate_cmd, variants);
        if (*synth_cmd.app) return cmd_synth(synth_cmd, synth_out);
        if (*refine_cmd.app) return cmd_refine(refine_cmd, refine_labels, refine_out, refine_trace);
        if (*select_cmd.app) {
            return cmd_select(select_cmd, select_labels, select_count, select_strategy, select_scores);
        }
        if (*annotate_cmd.app) {
            return cmd_annotate(annotate_cmd, annotate_sources, annotate_count, annotate_queries, annotate_out);
        }
        if (*eval_cmd.app) return cmd_eval(eval_cmd, eval_labels, eval_emb, eval_topk, eval_k);
        if (*inspect_cmd.app) return cmd_inspect(inspect_cmd);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 1;
}
