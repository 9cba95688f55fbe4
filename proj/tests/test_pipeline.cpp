#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "kgalign/pipeline.hpp"
#include "support.hpp"

using namespace kgalign;

namespace {

// A quicker configuration for unit-level runs.
RunConfig small_config(std::uint64_t seed_ = 1) {
    RunConfig c;
    c.seed = seed_;
    c.synth.entity_count = 150;
    c.synth.mean_degree = 4.0;
    c.budget_fraction = 0.2;
    c.matcher.dim = 32;
    c.matcher.epochs = 80;
    return c;
}

void check_budget(const RunReport& r) {
    std::size_t sum = 0;
    for (const auto& it : r.iterations) sum += it.queries;
    EXPECT_EQ(sum, r.spent_queries);
    EXPECT_LE(r.spent_queries, r.budget);
    if (!r.error) EXPECT_EQ(r.spent_queries, std::min(r.budget, r.source_entities));
    std::set<EntityId> seen(r.annotated.begin(), r.annotated.end());
    EXPECT_EQ(seen.size(), r.annotated.size());
}

}  // namespace

TEST(Budget, SplitEvenlyWithRemainderLast) {
    EXPECT_EQ(split_budget(50, 3), (std::vector<std::size_t>{16, 16, 18}));
    EXPECT_EQ(split_budget(2, 3), (std::vector<std::size_t>{0, 0, 2}));
    EXPECT_EQ(split_budget(9, 1), (std::vector<std::size_t>{9}));
    EXPECT_THROW(split_budget(9, 0), ConfigError);
}

TEST(Budget, ZeroBudgetIsAConfigError) {
    RunConfig c = small_config();
    c.budget_fraction = 0.001;
    EXPECT_THROW(run(c), ConfigError);
}

TEST(Run, OracleBeatsRandomGuessing) {
    RunConfig c = small_config();
    auto r = run(c);
    check_budget(r);
    ASSERT_EQ(r.iterations.size(), 3u);
    ASSERT_TRUE(r.last()->hit1.has_value());
    EXPECT_GT(*r.last()->hit1, 1.0 / double(r.target_entities));
    EXPECT_EQ(r.spent_queries, 30u);
    EXPECT_EQ(r.iterations[0].queries, 10u);
}

TEST(Run, ByteIdenticalReports) {
    RunConfig c = small_config(3);
    c.backend = BackendKind::noisy_oracle;
    auto a = run(c), b = run(c);
    EXPECT_EQ(report_csv_string(a), report_csv_string(b));
    EXPECT_EQ(report_json(a).dump(), report_json(b).dump());
    EXPECT_EQ(a.annotated, b.annotated);
}

TEST(Run, OneVersusThreeIterations) {
    RunConfig c = small_config(2);
    c.iterations = 1;
    auto one = run(c);
    c.iterations = 3;
    auto three = run(c);
    check_budget(one);
    check_budget(three);
    EXPECT_EQ(one.iterations.size(), 1u);
    EXPECT_EQ(three.iterations.size(), 3u);
    EXPECT_EQ(one.spent_queries, three.spent_queries);
}

TEST(Run, NoiseFreeOracleGivesCleanRefinedLabels) {
    RunConfig c = small_config(4);
    c.synth.edge_dropout = 0.0;
    c.synth.name_noise = 0.0;
    c.k = c.synth.entity_count;
    auto r = run(c);
    check_budget(r);
    for (const auto& it : r.iterations) {
        ASSERT_TRUE(it.refined_tpr.has_value());
        EXPECT_EQ(*it.refined_tpr, 1.0) << "iteration " << it.iteration;
    }
}

TEST(Run, BackendFailureKeepsPartialReport) {
    class Failing : public AnnotatorBackend {
    public:
        std::string name() const override { return "failing"; }
        Reply ask(const Query&) override { throw BackendError("boom"); }
    };
    RunConfig c = small_config();
    auto p = load_pair(c);
    Failing f;
    auto r = run(c, p, f);
    ASSERT_TRUE(r.error.has_value());
    EXPECT_EQ(*r.error, "boom");
    EXPECT_EQ(r.iterations.size(), 1u);
}

TEST(Run, TimingColumnOnlyWhenAsked) {
    RunConfig c = small_config();
    c.iterations = 1;
    auto plain = report_csv_string(run(c));
    EXPECT_EQ(plain.find("seconds"), std::string::npos);
    c.timing = true;
    auto timed = report_csv_string(run(c));
    EXPECT_NE(timed.find(",seconds\n"), std::string::npos);
}

TEST(Ablate, FullEqualsRun) {
    RunConfig c = small_config(5);
    EXPECT_EQ(report_csv_string(ablate(c, Variant::full)), report_csv_string(run(c)));
}

TEST(Ablate, NoRefinerTrainsOnRawLabels) {
    RunConfig c = small_config(5);
    c.backend = BackendKind::noisy_oracle;
    auto r = ablate(c, Variant::no_refiner);
    check_budget(r);
    for (const auto& it : r.iterations) {
        EXPECT_EQ(it.refined, it.labels);
        EXPECT_EQ(it.refined_tpr, it.label_tpr);
    }
}

TEST(Ablate, EveryVariantRespectsBudget) {
    for (const auto& [v, name] : variant_names()) {
        RunConfig c = small_config(6);
        c.iterations = 2;
        c.matcher.epochs = 20;
        auto r = ablate(c, v);
        EXPECT_EQ(r.variant, name);
        check_budget(r);
    }
    EXPECT_THROW(parse_variant("w/o-everything"), ConfigError);
}

TEST(Config, ReadsKeysAndRejectsUnknown) {
    auto dir = kgtest::scratch_dir("config");
    {
        std::ofstream out(dir / "run.cfg");
        out << "# comment\n\nbudget_fraction = 0.2\niterations=5\nk=7\ndelta0=0.4\nmatcher.dim=16\nbackend=noisy\n"
               "variant=no-refiner\nsynth.entities=77\nseed=9\n";
    }
    auto c = read_config(dir / "run.cfg");
    EXPECT_EQ(c.budget_fraction, 0.2);
    EXPECT_EQ(c.iterations, 5);
    EXPECT_EQ(c.k, 7u);
    EXPECT_EQ(c.refiner.delta0, 0.4);
    EXPECT_EQ(c.matcher.dim, 16u);
    EXPECT_EQ(c.backend, BackendKind::noisy_oracle);
    EXPECT_EQ(c.variant, Variant::no_refiner);
    EXPECT_EQ(c.synth.entity_count, 77u);
    EXPECT_EQ(c.seed, 9u);
    {
        std::ofstream out(dir / "bad.cfg");
        out << "k=3\nbogus=1\n";
    }
    try {
        read_config(dir / "bad.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.cfg:2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(read_config(dir / "missing.cfg"), DataError);
    RunConfig bad;
    EXPECT_THROW(apply_setting(bad, "iterations", "three"), ConfigError);
    bad.iterations = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Synth, DropoutWithinThreeSigma) {
    SynthSpec s;
    s.entity_count = 500;
    s.mean_degree = 6.0;
    s.edge_dropout = 0.2;
    s.seed = 11;
    auto p = synth_pair(s);
    const double total = double(p.source.forward_triple_count());
    const double kept = double(p.target.forward_triple_count());
    const double sigma = std::sqrt(total * 0.8 * 0.2);
    EXPECT_LE(std::abs(kept - 0.8 * total), 3 * sigma);
}

TEST(Synth, ExactCopyAndDeterminism) {
    SynthSpec s;
    s.entity_count = 80;
    s.seed = 3;
    auto a = synth_pair(s), b = synth_pair(s);
    EXPECT_EQ(a.source.forward_triples(), b.source.forward_triples());
    EXPECT_EQ(a.target.forward_triples(), b.target.forward_triples());
    EXPECT_EQ(a.source.forward_triple_count(), a.target.forward_triple_count());
    for (auto [x, y] : *a.truth) EXPECT_EQ(name_similarity(a.source.entity_name(x), a.target.entity_name(y)), 1.0);
}
