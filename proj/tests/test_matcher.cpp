#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kgalign/matcher.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kgalign;

namespace {

ScoreMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, int levels) {
    ScoreMatrix sm(rows, cols);
    // few distinct levels so ties are common
    for (auto& v : sm.values) v = double(rng.index(std::uint64_t(levels))) / double(levels);
    return sm;
}

}  // namespace

TEST(Gradient, MatchesCentralDifferences) {
    Rng rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        auto p = kgtest::small_pair(rng.next(), 4 + rng.index(8), 2.0, 0.2);
        const auto agg = detail::Aggregator::build(p);
        const std::size_t n = p.source.entity_count(), m = p.target.entity_count(), dim = 1 + rng.index(5);
        const int rounds = int(rng.index(3));
        std::vector<double> x((n + m) * dim);
        for (auto& v : x) v = rng.normal();
        const auto samples = oracle::corrupted_samples(rng, n, m, 1 + rng.index(6));
        const double margin = 0.5 + rng.uniform();
        if (oracle::kink_clearance(agg, n, dim, rounds, margin, x, samples) < 1e-2) continue;
        std::vector<double> g;
        margin_loss_and_gradient(agg, n, dim, rounds, margin, x, samples, &g);
        const auto fd = oracle::numeric_gradient(agg, n, dim, rounds, margin, x, samples, 1e-4);
        if (oracle::both_flat(g, fd)) continue;
        EXPECT_LE(oracle::relative_error(g, fd), 1e-4) << "trial " << trial;
        ++checked;
    }
    EXPECT_GE(checked, 30);
}

TEST(Matcher, LearnsSmallIsomorphicGraphs) {
    double total = 0;
    int used = 0;
    for (std::uint64_t seed_ = 1; used < 3 && seed_ < 200; ++seed_) {
        SynthSpec sp;
        sp.entity_count = 10;
        sp.relation_count = 3;
        sp.mean_degree = 2.0;
        sp.seed = seed_;
        auto p = synth_pair(sp);
        const auto& truth = *p.truth;
        if (truth.size() != 10) continue;
        if (!oracle::unique_structure(p.source, {truth[0].first, truth[1].first, truth[2].first})) continue;
        LabelSet labels;
        std::vector<EntityPair> held;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (i < 3) labels.push_back({truth[i].first, truth[i].second});
            else held.push_back(truth[i]);
        }
        MatcherConfig mc;
        mc.seed = seed_;
        auto m = EmbeddingMatcher::train(mc, p, labels);
        total += evaluate(m, held).hit1;
        ++used;
    }
    ASSERT_EQ(used, 3);
    EXPECT_GE(total / 3, 0.8);
}

TEST(Matcher, Errors) {
    auto p = kgtest::small_pair(1, 10);
    EXPECT_THROW(EmbeddingMatcher::train({}, p, {}), ConfigError);
    EXPECT_THROW(EmbeddingMatcher::train({}, p, LabelSet{{0, 99}}), DataError);
    MatcherConfig bad;
    bad.dim = 0;
    EXPECT_THROW(EmbeddingMatcher::train(bad, p, LabelSet{{0, 0}}), ConfigError);
}

TEST(Matcher, SingleNodePair) {
    KgPair p;
    p.source = KnowledgeGraph::build({"a"}, {"r"}, {});
    p.target = KnowledgeGraph::build({"a2"}, {"r"}, {});
    p.truth = std::vector<EntityPair>{{0, 0}};
    auto m = EmbeddingMatcher::train({}, p, LabelSet{{0, 0}});
    EXPECT_EQ(evaluate(m, *p.truth).hit1, 1.0);
}

TEST(Matcher, PositiveDistanceShrinks) {
    auto p = kgtest::small_pair(5, 60, 3.0, 0.1);
    LabelSet labels;
    for (std::size_t i = 0; i < 10; ++i) labels.push_back({(*p.truth)[i].first, (*p.truth)[i].second});
    MatcherConfig mc;
    mc.tie_seeds = false;
    auto m = EmbeddingMatcher::train(mc, p, normalize(labels));
    EXPECT_LT(m.final_positive_distance(), m.initial_positive_distance());
    EXPECT_EQ(m.epoch_losses().size(), std::size_t(mc.epochs));
    EXPECT_LE(m.epoch_losses().back(), m.epoch_losses().front());
}

TEST(Matcher, Deterministic) {
    auto p = kgtest::small_pair(6, 40);
    LabelSet labels{{0, 0}, {1, 1}, {2, 2}};
    auto a = EmbeddingMatcher::train({}, p, labels).score_matrix();
    auto b = EmbeddingMatcher::train({}, p, labels).score_matrix();
    EXPECT_EQ(a.values, b.values);
}

TEST(Confident, Examples) {
    ScoreMatrix sm(2, 2);
    sm.values = {0.9, 0.1, 0.8, 0.2};
    EXPECT_EQ(confident_pairs(sm), (std::vector<EntityPair>{{0, 0}}));

    ScoreMatrix id(4, 4);
    for (std::size_t i = 0; i < 4; ++i) id.at(i, i) = 1.0;
    EXPECT_EQ(confident_pairs(id), (std::vector<EntityPair>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}));

    ScoreMatrix flat(3, 3, 0.5);
    EXPECT_EQ(confident_pairs(flat), (std::vector<EntityPair>{{0, 0}}));
}

TEST(Confident, MutualArgmaxOracle) {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        auto sm = random_matrix(rng, 1 + rng.index(8), 1 + rng.index(8), 4);
        std::vector<EntityPair> want;
        for (std::size_t s = 0; s < sm.rows; ++s) {
            for (std::size_t t = 0; t < sm.cols; ++t) {
                bool row_top = true, col_top = true;
                for (std::size_t c = 0; c < sm.cols; ++c) {
                    if (sm.at(s, c) > sm.at(s, t) || (sm.at(s, c) == sm.at(s, t) && c < t)) row_top = false;
                }
                for (std::size_t r = 0; r < sm.rows; ++r) {
                    if (sm.at(r, t) > sm.at(s, t) || (sm.at(r, t) == sm.at(s, t) && r < s)) col_top = false;
                }
                if (row_top && col_top) want.emplace_back(s, t);
            }
        }
        EXPECT_EQ(confident_pairs(sm), want);
    }
}

TEST(Metrics, PerfectAndSecond) {
    ScoreMatrix id(12, 12);
    for (std::size_t i = 0; i < 12; ++i) id.at(i, i) = 1.0;
    std::vector<EntityPair> truth;
    for (EntityId i = 0; i < 12; ++i) truth.emplace_back(i, i);
    auto r = evaluate(id, truth);
    EXPECT_EQ(r.hit1, 1.0);
    EXPECT_EQ(r.hit10, 1.0);
    EXPECT_EQ(r.mrr, 1.0);

    // truth always second on both sides: cyclic shift puts 2 on (i, i+1)
    ScoreMatrix shifted(12, 12);
    for (std::size_t i = 0; i < 12; ++i) {
        shifted.at(i, (i + 1) % 12) = 2.0;
        shifted.at(i, i) = 1.0;
    }
    r = evaluate(shifted, truth);
    EXPECT_EQ(r.hit1, 0.0);
    EXPECT_EQ(r.hit10, 1.0);
    EXPECT_EQ(r.mrr, 0.5);
}

TEST(Metrics, BruteForceAgreement) {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t rows = 1 + rng.index(20), cols = 1 + rng.index(20);
        auto sm = random_matrix(rng, rows, cols, 1 + int(rng.index(10)));
        std::vector<EntityPair> truth;
        for (auto i : rng.sample(std::min(rows, cols), 1 + rng.index(std::min(rows, cols)))) {
            truth.emplace_back(EntityId(i), EntityId(rng.index(cols)));
        }
        auto got = evaluate(sm, truth);
        auto want = oracle::metrics(sm, truth);
        EXPECT_EQ(got.hit1, want.hit1);
        EXPECT_EQ(got.hit10, want.hit10);
        EXPECT_EQ(got.mrr, want.mrr);
    }
}

TEST(Metrics, Errors) {
    ScoreMatrix sm(2, 2);
    EXPECT_THROW(evaluate(sm, {}), ConfigError);
    EXPECT_THROW(evaluate(sm, {{0, 5}}), DataError);
}

TEST(ConfidentEval, Examples) {
    const std::vector<EntityPair> truth{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}};
    auto e = evaluate_confident(truth, truth);
    EXPECT_EQ(e.precision, 1.0);
    EXPECT_EQ(e.recall, 1.0);
    EXPECT_EQ(e.f1, 1.0);

    e = evaluate_confident({}, truth);
    EXPECT_FALSE(e.precision.has_value());
    EXPECT_EQ(e.recall, 0.0);
    EXPECT_FALSE(e.f1.has_value());

    e = evaluate_confident({{0, 0}, {1, 1}, {2, 2}, {3, 4}}, truth);
    EXPECT_EQ(e.precision, 0.75);
    EXPECT_EQ(e.recall, 0.5);
    EXPECT_DOUBLE_EQ(*e.f1, 0.6);
}

TEST(ConfidentEval, BruteForceAgreement) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<EntityPair> a, b;
        for (std::size_t i = 0; i < rng.index(10); ++i) a.emplace_back(EntityId(rng.index(5)), EntityId(rng.index(5)));
        for (std::size_t i = 0; i < 1 + rng.index(10); ++i) b.emplace_back(EntityId(rng.index(5)), EntityId(rng.index(5)));
        auto got = evaluate_confident(a, b);
        auto want = oracle::prf(a, b);
        EXPECT_EQ(got.precision, want.precision);
        EXPECT_EQ(got.recall, want.recall);
        EXPECT_EQ(got.f1, want.f1);
    }
}

TEST(Dumps, EmbeddingsAndTopK) {
    auto p = kgtest::small_pair(2, 8);
    MatcherConfig mc;
    mc.dim = 3;
    mc.epochs = 5;
    auto m = EmbeddingMatcher::train(mc, p, LabelSet{{0, 0}});
    auto dir = kgtest::scratch_dir("dumps");
    write_embeddings(m, dir / "emb.bin");
    std::ifstream in(dir / "emb.bin", std::ios::binary);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "kgalign-embeddings " + std::to_string(m.source_count()) + " " +
                          std::to_string(m.target_count()) + " 3");
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(rest.size(), (m.source_count() + m.target_count()) * 3 * 4);
    float first;
    std::memcpy(&first, rest.data(), 4);
    EXPECT_FLOAT_EQ(first, float(m.embedding(0, false)[0]));

    ScoreMatrix sm(2, 3);
    sm.values = {0.1, 0.3, 0.3, 1, 0, 2};
    std::ostringstream os;
    write_topk_csv(sm, 2, os);
    EXPECT_EQ(os.str(), "source_id,rank,target_id,score\n0,1,1,0.3\n0,2,2,0.3\n1,1,2,2\n1,2,0,1\n");
}
