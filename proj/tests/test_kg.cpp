#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "kgalign/kg.hpp"
#include "kgalign/rng.hpp"
#include "support.hpp"

using namespace kgalign;
using kgtest::make_kg;

namespace {

// Distinct heads / tails / pairs of forward relation r, counted from a raw
// triple list.
std::tuple<double, double> count_functionality(const std::vector<Triple>& ts, RelationId r) {
    std::set<EntityId> heads, tails;
    std::set<std::pair<EntityId, EntityId>> pairs;
    for (const auto& t : ts) {
        if (t.relation != r) continue;
        heads.insert(t.head);
        tails.insert(t.tail);
        pairs.insert({t.head, t.tail});
    }
    return {double(heads.size()) / double(pairs.size()), double(tails.size()) / double(pairs.size())};
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

}  // namespace

TEST(Functionality, LocateInToy) {
    auto kg = make_kg({{"Hawaii", "locate_in", "US"}, {"Miami", "locate_in", "US"}});
    EXPECT_EQ(kg.functionality(0), 1.0);
    EXPECT_EQ(kg.inverse_functionality(0), 0.5);
}

TEST(Functionality, SingleTriple) {
    auto kg = make_kg({{"a", "r", "b"}});
    EXPECT_EQ(kg.functionality(0), 1.0);
    EXPECT_EQ(kg.inverse_functionality(0), 1.0);
}

TEST(Functionality, TwoThirds) {
    auto kg = make_kg({{"a", "r", "x"}, {"a", "r", "y"}, {"b", "r", "x"}});
    EXPECT_DOUBLE_EQ(kg.functionality(0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(kg.inverse_functionality(0), 2.0 / 3.0);
}

TEST(Functionality, ReversedRelationSwapsRoles) {
    auto kg = make_kg({{"Hawaii", "locate_in", "US"}, {"Miami", "locate_in", "US"}});
    ASSERT_EQ(kg.relation_count(), 2u);
    EXPECT_EQ(kg.functionality(1), kg.inverse_functionality(0));
    EXPECT_EQ(kg.inverse_functionality(1), kg.functionality(0));
}

TEST(Functionality, UndefinedForEmptyRelation) {
    auto kg = KnowledgeGraph::build({"a", "b"}, {"r", "unused"}, {{0, 0, 1}});
    EXPECT_THROW(kg.functionality(1), DataError);
    EXPECT_THROW(kg.inverse_functionality(1), DataError);
    EXPECT_THROW(kg.functionality(3), DataError);
}

TEST(Functionality, RandomGraphsMatchSetCounting) {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.index(30), rels = 1 + rng.index(8);
        std::vector<std::string> ents, relnames;
        for (std::size_t i = 0; i < n; ++i) ents.push_back("e" + std::to_string(i));
        for (std::size_t i = 0; i < rels; ++i) relnames.push_back("r" + std::to_string(i));
        std::vector<Triple> ts;
        const std::size_t m = 1 + rng.index(80);
        for (std::size_t i = 0; i < m; ++i) {
            ts.push_back({EntityId(rng.index(n)), RelationId(rng.index(rels)), EntityId(rng.index(n))});
        }
        auto kg = KnowledgeGraph::build(ents, relnames, ts);
        std::size_t total = 0;
        for (RelationId r = 0; r < kg.relation_count(); ++r) total += kg.relation_triples(r).size();
        EXPECT_EQ(total, kg.triples().size());
        for (RelationId r = 0; r < rels; ++r) {
            if (!kg.has_triples(r)) continue;
            auto [f, finv] = count_functionality(ts, r);
            EXPECT_EQ(kg.functionality(r), f);
            EXPECT_EQ(kg.inverse_functionality(r), finv);
            EXPECT_EQ(kg.functionality(r + RelationId(rels)), finv);
        }
    }
}

TEST(Neighbors, OrderedAndReversed) {
    auto kg = make_kg({{"a", "r", "b"}, {"c", "s", "a"}, {"a", "r", "c"}});
    const auto a = kgtest::id(kg, "a"), b = kgtest::id(kg, "b"), c = kgtest::id(kg, "c");
    auto out = kg.neighbors_out(a);
    // r -> b, r -> c, then s^-1 -> c
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0], std::make_pair(RelationId(0), b));
    EXPECT_EQ(out[1], std::make_pair(RelationId(0), c));
    EXPECT_EQ(kg.relation_name(out[2].first), "s^-1");
    EXPECT_EQ(out[2].second, c);
    auto in = kg.neighbors_in(a);
    ASSERT_EQ(in.size(), 3u);
    EXPECT_EQ(in[0], std::make_pair(RelationId(1), c));
}

TEST(Neighbors, WithoutReversal) {
    auto kg = make_kg({{"a", "r", "b"}, {"c", "s", "a"}}, false);
    EXPECT_EQ(kg.relation_count(), 2u);
    EXPECT_EQ(kg.neighbors_out(kgtest::id(kg, "a")).size(), 1u);
    EXPECT_EQ(kg.neighbors_in(kgtest::id(kg, "a")).size(), 1u);
}

TEST(Neighbors, StarHub) {
    std::vector<kgtest::NamedTriple> ts;
    for (int i = 0; i < 5; ++i) ts.emplace_back("hub", "r", "leaf" + std::to_string(i));
    auto kg = make_kg(ts, false);
    EXPECT_EQ(kg.neighbors_out(kgtest::id(kg, "hub")).size(), 5u);
    EXPECT_TRUE(kg.neighbors_out(kgtest::id(kg, "leaf0")).empty());
}

TEST(Names, LastSegmentPercentDecoded) {
    EXPECT_EQ(name_from_uri("http://dbpedia.org/resource/New_York%2C_USA"), "New_York,_USA");
    EXPECT_EQ(name_from_uri("http://dbpedia.org/resource/Caf%C3%A9"), "Café");
    EXPECT_EQ(name_from_uri("plain"), "plain");
}

TEST(Builder, DeduplicatesAndCounts) {
    KgBuilder b;
    b.add("a", "r", "b");
    b.add("a", "r", "b");
    b.add("b", "r", "a");
    auto kg = b.finish(true);
    EXPECT_EQ(kg.forward_triple_count(), 2u);
    EXPECT_EQ(kg.duplicate_count(), 1u);
    EXPECT_EQ(kg.triples().size(), 4u);
}

TEST(Loader, ReadsDirectory) {
    auto dir = kgtest::scratch_dir("load");
    write_file(dir / "rel_triples_1", "s/a\ts/r\ts/b\ns/b\ts/r\ts/c\n");
    write_file(dir / "rel_triples_2", "t/x\tt/p\tt/y\nt/y\tt/p\tt/z\n");
    write_file(dir / "ent_links", "s/a\tt/x\ns/b\tt/y\n");
    auto pair = load_openea(dir);
    EXPECT_EQ(pair.source.entity_count(), 3u);
    EXPECT_EQ(pair.target.entity_count(), 3u);
    ASSERT_TRUE(pair.has_truth());
    EXPECT_EQ(pair.truth->size(), 2u);
    EXPECT_EQ(pair.source.entity_name(0), "a");
}

TEST(Loader, MalformedLineCarriesLineNumber) {
    auto dir = kgtest::scratch_dir("malformed");
    write_file(dir / "rel_triples_1", "a\tr\tb\na\tr\n");
    write_file(dir / "rel_triples_2", "x\tp\ty\n");
    try {
        load_openea(dir);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("rel_triples_1:2"), std::string::npos) << e.what();
    }
}

TEST(Loader, MissingFileAndUnknownLink) {
    auto dir = kgtest::scratch_dir("missing");
    write_file(dir / "rel_triples_1", "a\tr\tb\n");
    EXPECT_THROW(load_openea(dir), DataError);
    write_file(dir / "rel_triples_2", "x\tp\ty\n");
    write_file(dir / "ent_links", "a\tx\nghost\ty\n");
    try {
        load_openea(dir);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
}

TEST(Loader, RoundTrip) {
    auto dir = kgtest::scratch_dir("roundtrip");
    write_file(dir / "rel_triples_1", "s/a\ts/r\ts/b\ns/b\ts/q\ts/c\ns/a\ts/r\ts/b\n");
    write_file(dir / "rel_triples_2", "t/x\tt/p\tt/y\nt/z\tt/p\tt/y\n");
    write_file(dir / "ent_links", "s/a\tt/x\ns/c\tt/z\n");
    auto first = load_openea(dir);
    auto out = kgtest::scratch_dir("roundtrip_out");
    save_openea(first, out);
    auto second = load_openea(out);
    auto uri_triples = [](const KnowledgeGraph& kg) {
        std::set<std::tuple<std::string, std::string, std::string>> s;
        for (const auto& t : kg.forward_triples()) {
            s.insert({kg.entity_uri(t.head), kg.relation_uri(t.relation), kg.entity_uri(t.tail)});
        }
        return s;
    };
    EXPECT_EQ(uri_triples(first.source), uri_triples(second.source));
    EXPECT_EQ(uri_triples(first.target), uri_triples(second.target));
    EXPECT_EQ(first.source.forward_triples(), second.source.forward_triples());
    EXPECT_EQ(*first.truth, *second.truth);
}
