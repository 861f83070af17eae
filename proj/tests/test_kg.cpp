#include "kgrank/kg.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "kgrank/util.hpp"
#include "test_support.hpp"

using namespace kgrank;
using testsup::fresh_dir;
using testsup::write_file;
using testsup::write_toy_dataset;

TEST(KgLoad, ToyDatasetCountsAndLabels) {
    auto dir = write_toy_dataset();
    auto kg = load_dataset(dir, DatasetKind::Curated);
    EXPECT_EQ(kg.entity_count(), 5);
    EXPECT_EQ(kg.relation_count(), 2);
    EXPECT_EQ(kg.train.size(), 5u);
    EXPECT_EQ(kg.valid.size(), 1u);
    EXPECT_EQ(kg.test.size(), 1u);
    EXPECT_EQ(kg.entity_labels[3], "delta");
    EXPECT_EQ(kg.relation_labels[1], "knows");
    EXPECT_FALSE(kg.has_definitions());
    EXPECT_FALSE(kg.has_clusters());
    EXPECT_EQ(kg.duplicates_train, 0);
}

TEST(KgLoad, EmptySplitFileIsValid) {
    auto dir = write_toy_dataset();
    write_file(dir + "/valid.tsv", "");
    auto kg = load_dataset(dir, DatasetKind::Curated);
    EXPECT_TRUE(kg.valid.empty());
}

TEST(KgLoad, MissingFileFails) {
    auto dir = write_toy_dataset();
    std::filesystem::remove(dir + "/test.tsv");
    EXPECT_THROW(load_dataset(dir, DatasetKind::Curated), Error);
}

TEST(KgLoad, MalformedLineReportsFileAndLine) {
    auto dir = write_toy_dataset();
    write_file(dir + "/train.tsv", "0\t0\t1\n1\t0\n");
    try {
        load_dataset(dir, DatasetKind::Curated);
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("train.tsv:2"), std::string::npos) << msg;
    }
}

TEST(KgLoad, NonNumericIndexFails) {
    auto dir = write_toy_dataset();
    write_file(dir + "/train.tsv", "0\tx\t1\n");
    EXPECT_THROW(load_dataset(dir, DatasetKind::Curated), Error);
}

TEST(KgLoad, OutOfRangeEntityFails) {
    auto dir = write_toy_dataset();
    write_file(dir + "/train.tsv", "0\t0\t9\n");
    EXPECT_THROW(load_dataset(dir, DatasetKind::Curated), Error);
}

TEST(KgLoad, NonDenseLabelIndexFails) {
    auto dir = write_toy_dataset();
    write_file(dir + "/entities.tsv", "0\talpha\n2\tbeta\n");
    EXPECT_THROW(load_dataset(dir, DatasetKind::Curated), Error);
}

TEST(KgLoad, SplitOverlapFails) {
    auto dir = write_toy_dataset();
    write_file(dir + "/test.tsv", "0\t0\t1\n");  // also in train
    EXPECT_THROW(load_dataset(dir, DatasetKind::Curated), Error);
}

TEST(KgLoad, DuplicatesKeptAndCounted) {
    auto dir = write_toy_dataset();
    write_file(dir + "/train.tsv", "0\t0\t1\n0\t0\t1\n1\t0\t2\n");
    auto kg = load_dataset(dir, DatasetKind::Curated);
    EXPECT_EQ(kg.train.size(), 3u);
    EXPECT_EQ(kg.duplicates_train, 1);
}

TEST(KgLoad, OptionalFilesPopulateFeatures) {
    auto dir = write_toy_dataset();
    write_file(dir + "/definitions.tsv", "0\tfirst letter\n3\tfourth letter\n");
    write_file(dir + "/rel_templates.tsv", "0\t[H] likes [T] a lot\n");
    write_file(dir + "/clusters.tsv", "0\t0\n1\t0\n2\t1\n3\t1\n4\t2\n");
    auto kg = load_dataset(dir, DatasetKind::Open);
    ASSERT_TRUE(kg.has_definitions());
    EXPECT_EQ(kg.entity_definitions[0], "first letter");
    EXPECT_EQ(kg.entity_definitions[1], "");
    EXPECT_EQ(kg.relation_templates[0], "[H] likes [T] a lot");
    EXPECT_EQ(kg.relation_templates[1], "");
    ASSERT_TRUE(kg.has_clusters());
    EXPECT_EQ(kg.cluster_count, 3);
    EXPECT_EQ(kg.cluster_of[3], 1);
}

TEST(KgLoad, PartialClusterMapFails) {
    auto dir = write_toy_dataset();
    write_file(dir + "/clusters.tsv", "0\t0\n1\t0\n");
    EXPECT_THROW(load_dataset(dir, DatasetKind::Open), Error);
}

TEST(KgLoad, SparseClusterIdsFail) {
    auto dir = write_toy_dataset();
    write_file(dir + "/clusters.tsv", "0\t0\n1\t0\n2\t5\n3\t5\n4\t0\n");
    EXPECT_THROW(load_dataset(dir, DatasetKind::Open), Error);
}

TEST(KgRoundTrip, SaveThenLoadIsIdentity) {
    auto dir = write_toy_dataset();
    write_file(dir + "/definitions.tsv", "2\tthird letter\n");
    write_file(dir + "/clusters.tsv", "0\t0\n1\t1\n2\t0\n3\t1\n4\t0\n");
    auto kg = load_dataset(dir, DatasetKind::Open);
    auto dir2 = fresh_dir("kgrank_copy");
    save_dataset(kg, dir2);
    auto kg2 = load_dataset(dir2, DatasetKind::Open);
    EXPECT_EQ(kg.entity_labels, kg2.entity_labels);
    EXPECT_EQ(kg.relation_labels, kg2.relation_labels);
    EXPECT_EQ(kg.train, kg2.train);
    EXPECT_EQ(kg.valid, kg2.valid);
    EXPECT_EQ(kg.test, kg2.test);
    EXPECT_EQ(kg.entity_definitions, kg2.entity_definitions);
    EXPECT_EQ(kg.cluster_of, kg2.cluster_of);
    EXPECT_EQ(kg.cluster_count, kg2.cluster_count);
}

TEST(FilterIndex, HandCheckedAnswerSets) {
    auto dir = write_toy_dataset();
    auto kg = load_dataset(dir, DatasetKind::Curated);
    auto idx = build_filter_index(kg);

    // Tails of (0, likes): only entity 1 from train.
    auto* t = idx.answers({0, 0, Direction::Tail});
    ASSERT_NE(t, nullptr);
    EXPECT_EQ(t->size(), 1u);
    EXPECT_TRUE(t->count(1));

    // Tails of (2, likes): test triple contributes entity 4.
    t = idx.answers({2, 0, Direction::Tail});
    ASSERT_NE(t, nullptr);
    EXPECT_TRUE(t->count(4));

    // Heads of (4, knows): train has (3,1,4) and (0,1,4).
    auto* h = idx.answers({4, 1, Direction::Head});
    ASSERT_NE(h, nullptr);
    EXPECT_EQ(h->size(), 2u);
    EXPECT_TRUE(h->count(3));
    EXPECT_TRUE(h->count(0));

    EXPECT_EQ(idx.answers({4, 0, Direction::Tail}), nullptr);
}

TEST(FilterIndex, MatchesBruteForceScanOnRandomGraph) {
    Rng rng(20240817);
    KnowledgeGraph kg;
    const int32_t ne = 12, nr = 3;
    for (int32_t i = 0; i < ne; ++i) kg.entity_labels.push_back("e" + std::to_string(i));
    for (int32_t i = 0; i < nr; ++i) kg.relation_labels.push_back("r" + std::to_string(i));
    std::set<Triple> seen;
    auto draw = [&](std::vector<Triple>& out, int n) {
        while (n > 0) {
            Triple t{static_cast<EntityId>(rng.below(ne)), static_cast<RelationId>(rng.below(nr)),
                     static_cast<EntityId>(rng.below(ne))};
            if (!seen.insert(t).second) continue;
            out.push_back(t);
            --n;
        }
    };
    draw(kg.train, 40);
    draw(kg.valid, 5);
    draw(kg.test, 5);

    auto idx = build_filter_index(kg);
    std::vector<Triple> all;
    for (int s = 0; s < 3; ++s)
        for (const auto& t : kg.split(s)) all.push_back(t);

    for (EntityId e = 0; e < ne; ++e) {
        for (RelationId r = 0; r < nr; ++r) {
            std::unordered_set<EntityId> tails, heads;
            for (const auto& t : all) {
                if (t.head == e && t.rel == r) tails.insert(t.tail);
                if (t.tail == e && t.rel == r) heads.insert(t.head);
            }
            auto* ti = idx.answers({e, r, Direction::Tail});
            auto* hi = idx.answers({e, r, Direction::Head});
            EXPECT_EQ(tails, ti ? *ti : std::unordered_set<EntityId>{});
            EXPECT_EQ(heads, hi ? *hi : std::unordered_set<EntityId>{});
        }
    }
}
