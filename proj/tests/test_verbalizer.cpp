#include "kgrank/verbalizer.hpp"

#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"

using namespace kgrank;

namespace {

KnowledgeGraph toy_kg() {
    auto dir = testsup::write_toy_dataset("kgrank_verb");
    return load_dataset(dir, DatasetKind::Curated);
}

}  // namespace

TEST(Alphabet, FirstSymbolsAndBijectiveRollover) {
    EXPECT_EQ(option_identifier(0), "A");
    EXPECT_EQ(option_identifier(2), "C");
    EXPECT_EQ(option_identifier(25), "Z");
    EXPECT_EQ(option_identifier(26), "AA");
    EXPECT_EQ(option_identifier(27), "AB");
    EXPECT_EQ(option_identifier(29), "AD");
}

TEST(Alphabet, DistinctAndStableUpTo30) {
    auto ids = option_alphabet(30);
    std::set<std::string> uniq(ids.begin(), ids.end());
    EXPECT_EQ(uniq.size(), 30u);
    EXPECT_EQ(ids, option_alphabet(30));
    for (int32_t i = 0; i < 30; ++i) EXPECT_EQ(identifier_index(ids[i], 30), i);
    EXPECT_EQ(identifier_index("AE", 30), -1);
    EXPECT_EQ(identifier_index("a", 30), -1);
}

TEST(QuerySequence, TemplateFillsBothDirections) {
    auto kg = toy_kg();
    kg.relation_templates = {"[H] played in movie [T]?", ""};
    EXPECT_EQ(make_query_sequence(kg, {0, 0, Direction::Tail}),
              "alpha played in movie ____?");
    EXPECT_EQ(make_query_sequence(kg, {4, 0, Direction::Head}),
              "____ played in movie epsilon?");
}

TEST(QuerySequence, ConcatenationFallback) {
    auto kg = toy_kg();
    EXPECT_EQ(make_query_sequence(kg, {0, 0, Direction::Tail}), "alpha likes ____?");
    EXPECT_EQ(make_query_sequence(kg, {3, 1, Direction::Head}), "____ knows delta?");
}

TEST(QuerySequence, TemplateMissingPlaceholderFails) {
    auto kg = toy_kg();
    kg.relation_templates = {"[H] likes something", ""};
    EXPECT_THROW(make_query_sequence(kg, {0, 0, Direction::Tail}), Error);
}

TEST(QuerySequence, DefinitionDecoration) {
    auto kg = toy_kg();
    kg.entity_definitions.assign(5, "");
    kg.entity_definitions[0] = "first letter";
    auto x_q = make_query_sequence(kg, {0, 0, Direction::Tail});
    EXPECT_EQ(decorate_query(kg, {0, 0, Direction::Tail}, x_q, true),
              "alpha likes ____? (first letter)");
    EXPECT_EQ(decorate_query(kg, {0, 0, Direction::Tail}, x_q, false), x_q);
    // No definition for this entity: unchanged even with the toggle on.
    auto x_q2 = make_query_sequence(kg, {1, 0, Direction::Tail});
    EXPECT_EQ(decorate_query(kg, {1, 0, Direction::Tail}, x_q2, true), x_q2);
}

TEST(CandidateSequence, PlainAndInteractionForms) {
    std::string x_q = "Jackie Chan played in movie ____?";
    std::vector<std::string> cands = {"Ip Man", "King of Comedy", "Police Story"};
    EXPECT_EQ(make_candidate_sequence(x_q, cands, false),
              "A. Ip Man B. King of Comedy C. Police Story");
    EXPECT_EQ(make_candidate_sequence(x_q, cands, true),
              "A. Jackie Chan played in movie Ip Man? "
              "B. Jackie Chan played in movie King of Comedy? "
              "C. Jackie Chan played in movie Police Story?");
    EXPECT_EQ(make_candidate_sequence(x_q, {"solo"}, false), "A. solo");
}

TEST(CandidateSequence, InteractionFormContainsLabelsOnceAndHeadKTimes) {
    std::string x_q = "alpha likes ____?";
    std::vector<std::string> cands = {"beta", "gamma", "delta", "zeta"};
    auto s = make_candidate_sequence(x_q, cands, true);
    auto count = [&](const std::string& needle) {
        size_t n = 0, pos = 0;
        while ((pos = s.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };
    for (const auto& c : cands) EXPECT_EQ(count(c), 1u) << c;
    EXPECT_EQ(count("alpha"), 4u);
    EXPECT_EQ(count(kBlank), 0u);
}

TEST(AssembleInput, PlainGoldenFile) {
    std::string x_q = "alpha likes ____?";
    PromptBundle b;
    b.x_q = x_q;
    b.x_c = make_candidate_sequence(x_q, {"beta", "gamma", "delta"}, true);
    auto got = assemble_input(b, false);
    auto want = testsup::read_file(std::string(KGRANK_TEST_DIR) + "/golden/assemble_plain.txt");
    EXPECT_EQ(got, want);
}

TEST(AssembleInput, KnowledgeModeWithEmptySupport) {
    PromptBundle b;
    b.x_q = "alpha likes ____?";
    b.x_c = "A. beta B. gamma";
    b.x_k_q = "alpha knows epsilon?";
    b.x_k_c = "";
    auto got = assemble_input(b, true);
    EXPECT_NE(got.find("### Supporting information: alpha knows epsilon?\n\n"),
              std::string::npos);
    EXPECT_NE(got.find("### Candidate supporting knowledge: \n\n"), std::string::npos);
    EXPECT_TRUE(got.ends_with("A. beta B. gamma ### Response: "));
}

TEST(AssembleInput, ContainsQueryExactlyOnce) {
    PromptBundle b;
    b.x_q = "QUERYMARKER";
    b.x_c = "A. x B. y";
    for (bool km : {false, true}) {
        auto s = assemble_input(b, km);
        auto first = s.find(b.x_q);
        ASSERT_NE(first, std::string::npos);
        EXPECT_EQ(s.find(b.x_q, first + 1), std::string::npos);
    }
}

TEST(AssembleInput, ShippedAssetsMatchBuiltins) {
    std::string dir = KGRANK_ASSET_DIR "/templates";
    EXPECT_EQ(load_template_asset(dir + "/t_in.txt"), std::string(kTemplatePlain));
    EXPECT_EQ(load_template_asset(dir + "/t_in_k.txt"), std::string(kTemplateKnowledge));
}

TEST(MakeTarget, RendersIdentifiersBySlot) {
    EXPECT_EQ(make_target({3, 1, 2}), "C A B");
    EXPECT_EQ(make_target({1, 2}), "A B");
    EXPECT_EQ(make_target({1}), "A");
}

TEST(MakeTarget, RejectsNonBijections) {
    EXPECT_THROW(make_target({1, 1, 3}), Error);
    EXPECT_THROW(make_target({0, 1}), Error);
    EXPECT_THROW(make_target({1, 3}), Error);
    EXPECT_THROW(make_target({}), Error);
}
