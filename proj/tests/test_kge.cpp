#include "kgrank/kge.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "test_support.hpp"

using namespace kgrank;

namespace {

KgeModel tiny_model(uint64_t seed = 7) { return kge_init(6, 2, 4, seed); }

// Score via the raw triple-nested sum, no contraction order tricks.
double naive_score(const KgeModel& m, const Query& q, EntityId cand) {
    const int32_t d = m.d;
    const double* eh = (q.dir == Direction::Tail) ? m.ent(q.known) : m.ent(cand);
    const double* et = (q.dir == Direction::Tail) ? m.ent(cand) : m.ent(q.known);
    const double* er = m.rel(q.rel);
    double s = 0.0;
    for (int32_t a = 0; a < d; ++a)
        for (int32_t b = 0; b < d; ++b)
            for (int32_t c = 0; c < d; ++c)
                s += m.core[(static_cast<size_t>(a) * d + b) * d + c] * eh[a] * er[b] * et[c];
    return s;
}

}  // namespace

TEST(KgeScore, MatchesNaiveTripleSumBothDirections) {
    auto m = tiny_model();
    for (int dir = 0; dir < 2; ++dir) {
        Query q{2, 1, dir == 0 ? Direction::Tail : Direction::Head};
        auto scores = kge_score_all(m, q);
        ASSERT_EQ(scores.size(), 6u);
        for (EntityId e = 0; e < 6; ++e)
            EXPECT_NEAR(scores[e], naive_score(m, q, e), 1e-12);
    }
}

TEST(KgeTopk, SortsByScoreThenIndex) {
    std::vector<double> scores = {0.5, 2.0, 0.5, -1.0, 2.0};
    auto top = topk(scores, 4);
    ASSERT_EQ(top.size(), 4u);
    EXPECT_EQ(top[0].entity, 1);  // 2.0, lower index first
    EXPECT_EQ(top[1].entity, 4);
    EXPECT_EQ(top[2].entity, 0);  // 0.5 tie, lower index first
    EXPECT_EQ(top[3].entity, 2);
}

TEST(KgeTopk, ClampsToPool) {
    std::vector<double> scores = {1.0, 2.0};
    auto top = topk(scores, 10, true);
    EXPECT_EQ(top.size(), 2u);
    EXPECT_THROW(topk(scores, 10, false), Error);
}

TEST(KgeGroups, BothDirectionsAndDeduplicatedAnswers) {
    std::vector<Triple> train = {{0, 0, 1}, {0, 0, 2}, {3, 0, 1}, {0, 0, 1}};
    auto groups = build_query_groups(train);
    // Tail groups: (0,0)->{1,2}, (3,0)->{1}.  Head groups: (1,0)->{0,3}, (2,0)->{0}.
    ASSERT_EQ(groups.size(), 4u);
    int tail_groups = 0;
    for (const auto& g : groups) {
        if (g.q.dir != Direction::Tail) continue;
        ++tail_groups;
        if (g.q.known == 0) {
            EXPECT_EQ(g.answers, (std::vector<EntityId>{1, 2}));
        } else {
            EXPECT_EQ(g.q.known, 3);
            EXPECT_EQ(g.answers, (std::vector<EntityId>{1}));
        }
    }
    EXPECT_EQ(tail_groups, 2);
}

TEST(KgeLoss, MatchesHandComputedBceOnFrozenScores) {
    // d=1 model chosen so scores are easy to enumerate: score_e = core*ek*er*ee.
    KgeModel m;
    m.d = 1;
    m.n_entities = 3;
    m.n_relations = 1;
    m.entity_emb = {1.0, 2.0, -1.0};
    m.relation_emb = {0.5};
    m.core = {2.0};
    QueryGroup g{{0, 0, Direction::Tail}, {1}};
    // ctx = 2*1*0.5 = 1; scores = {1, 2, -1}; labels = {0, 1, 0}
    double expect = 0.0;
    auto bce = [](double s, double y) {
        double p = stable_sigmoid(s);
        return -(y * std::log(p) + (1 - y) * std::log(1 - p));
    };
    expect = (bce(1, 0) + bce(2, 1) + bce(-1, 0)) / 3.0;
    EXPECT_NEAR(kge_group_loss(m, g), expect, 1e-12);
}

TEST(KgeGrad, MatchesCentralDifferences) {
    auto m = tiny_model(11);
    std::vector<Triple> train = {{0, 0, 1}, {1, 1, 2}, {3, 0, 4}, {2, 1, 5}};
    auto groups = build_query_groups(train);

    auto total_loss = [&](const KgeModel& model) {
        double s = 0.0;
        for (const auto& g : groups) s += kge_group_loss(model, g);
        return s;
    };
    KgeGrad grad(m);
    for (const auto& g : groups) kge_group_loss(m, g, &grad);

    Rng rng(99);
    const double h = 1e-6;
    auto check = [&](std::vector<double>& params, const std::vector<double>& gp) {
        for (int trial = 0; trial < 8; ++trial) {
            size_t i = static_cast<size_t>(rng.below(params.size()));
            double keep = params[i];
            params[i] = keep + h;
            double up = total_loss(m);
            params[i] = keep - h;
            double down = total_loss(m);
            params[i] = keep;
            double fd = (up - down) / (2 * h);
            EXPECT_NEAR(gp[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
    };
    check(m.entity_emb, grad.entity_emb);
    check(m.relation_emb, grad.relation_emb);
    check(m.core, grad.core);
}

TEST(KgeTrain, LossDecreasesAndStaysFinite) {
    auto dir = testsup::write_toy_dataset("kgrank_kge");
    auto kg = load_dataset(dir, DatasetKind::Curated);
    auto m = kge_init(kg.entity_count(), kg.relation_count(), 8, 3);
    KgeTrainConfig cfg;
    cfg.epochs = 40;
    cfg.lr = 0.1;
    cfg.seed = 3;
    auto history = kge_train(m, kg.train, cfg);
    ASSERT_EQ(history.size(), 40u);
    EXPECT_LT(history.back(), history.front());
    for (double x : history) EXPECT_TRUE(std::isfinite(x));
}

TEST(KgeTrain, DeterministicAcrossRuns) {
    auto dir = testsup::write_toy_dataset("kgrank_kge_det");
    auto kg = load_dataset(dir, DatasetKind::Curated);
    auto run = [&] {
        auto m = kge_init(kg.entity_count(), kg.relation_count(), 6, 5);
        KgeTrainConfig cfg;
        cfg.epochs = 10;
        cfg.seed = 5;
        kge_train(m, kg.train, cfg);
        return m;
    };
    auto a = run();
    auto b = run();
    EXPECT_EQ(a.entity_emb, b.entity_emb);
    EXPECT_EQ(a.relation_emb, b.relation_emb);
    EXPECT_EQ(a.core, b.core);
}

TEST(KgeTrain, RanksObservedAnswersHigher) {
    // After training, the gold tail should beat a never-linked entity.
    auto dir = testsup::write_toy_dataset("kgrank_kge_rank");
    auto kg = load_dataset(dir, DatasetKind::Curated);
    auto m = kge_init(kg.entity_count(), kg.relation_count(), 8, 3);
    KgeTrainConfig cfg;
    cfg.epochs = 80;
    cfg.lr = 0.1;
    cfg.seed = 3;
    kge_train(m, kg.train, cfg);
    auto scores = kge_score_all(m, {0, 0, Direction::Tail});  // train has (0,0,1)
    int above = 0;
    for (EntityId e = 0; e < kg.entity_count(); ++e)
        if (scores[e] > scores[1]) ++above;
    EXPECT_LE(above, 1);
}

TEST(KgeCheckpoint, BitExactRoundTrip) {
    auto m = tiny_model(21);
    auto dir = testsup::fresh_dir("kgrank_ckpt");
    auto path = dir + "/kge.bin";
    kge_save(m, path);
    auto m2 = kge_load(path);
    EXPECT_EQ(m.d, m2.d);
    EXPECT_EQ(m.n_entities, m2.n_entities);
    EXPECT_EQ(m.n_relations, m2.n_relations);
    EXPECT_EQ(m.entity_emb, m2.entity_emb);
    EXPECT_EQ(m.relation_emb, m2.relation_emb);
    EXPECT_EQ(m.core, m2.core);
}

TEST(KgeCheckpoint, RejectsWrongMagicAndTruncation) {
    auto dir = testsup::fresh_dir("kgrank_ckpt_bad");
    testsup::write_file(dir + "/junk.bin", "not a checkpoint");
    EXPECT_THROW(kge_load(dir + "/junk.bin"), Error);

    auto m = tiny_model(2);
    auto path = dir + "/kge.bin";
    kge_save(m, path);
    auto bytes = testsup::read_file(path);
    testsup::write_file(dir + "/cut.bin", bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(kge_load(dir + "/cut.bin"), Error);
}
