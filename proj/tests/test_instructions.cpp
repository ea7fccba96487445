#include <gtest/gtest.h>

#include <set>

#include "collagen/instructions.hpp"

using namespace collagen;

TEST(Templates, SubstitutionAndUnboundPlaceholder) {
    EXPECT_EQ(render_template("remove the {subject}", {{"subject", "fox"}}), "remove the fox");
    EXPECT_THROW(render_template("remove the {subject}", {}), Error);
    EXPECT_THROW(render_template("remove the {subject", {{"subject", "fox"}}), Error);
    EXPECT_EQ(placeholders("{a} and {b} then {a}"), (std::vector<std::string>{"a", "b", "a"}));
}

TEST(Templates, EveryBankHasEightParaphrasesWithOnePlaceholderSet) {
    const auto names = template_bank_names();
    EXPECT_GE(names.size(), 16u);
    for (auto name : names) {
        const auto bank = template_bank(name);
        EXPECT_GE(bank.size(), 8u) << name;
        std::set<std::string> first;
        for (const auto& p : placeholders(bank.front())) first.insert(p);
        std::set<std::string> distinct;
        for (const auto& pattern : bank) {
            std::set<std::string> mine;
            for (const auto& p : placeholders(pattern)) mine.insert(p);
            EXPECT_EQ(mine, first) << pattern;
            EXPECT_TRUE(distinct.insert(std::string(pattern)).second) << pattern;
        }
    }
    EXPECT_THROW(template_bank("nope"), Error);
}

TEST(Captions, SubjectExtraction) {
    EXPECT_EQ(caption_subject("A fox."), "fox");
    EXPECT_EQ(caption_subject("an orange fox"), "orange fox");
    EXPECT_EQ(caption_subject("The Dog!"), "dog");
    EXPECT_EQ(caption_subject("apple"), "apple");
}

TEST(Captions, DetailedUsedOnlyWhenItNamesTheSubject) {
    const CaptionPair good{"a fox", "a red fox sleeping in the grass"};
    EXPECT_EQ(caption_phrase(good, Verbosity::brief), "fox");
    EXPECT_EQ(caption_phrase(good, Verbosity::detailed), "red fox sleeping in the grass");
    const CaptionPair bad{"a fox", "an animal in the grass"};
    EXPECT_EQ(caption_phrase(bad, Verbosity::detailed), "fox");
}

TEST(Build, DeterministicAndContainsSubject) {
    const std::map<std::string, CaptionPair, std::less<>> captioned{{"subject", {"a fox", "a red fox in snow"}}};
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng a(RngState{s, 1}), b(RngState{s, 1});
        const auto x = build_instruction("remove", {}, captioned, a);
        const auto y = build_instruction("remove", {}, captioned, b);
        EXPECT_EQ(x, y);
        const auto text = render_instruction(x);
        EXPECT_NE(text.find("fox"), std::string::npos) << text;
        EXPECT_EQ(text, render_instruction(y));
    }
}

TEST(Build, ArticlesFollowThePhrase) {
    const std::map<std::string, CaptionPair, std::less<>> captioned{{"subject", {"an owl", "an owl on a branch"}}};
    Rng rng(RngState{1, 1});
    const auto spec = build_instruction("add", {}, captioned, rng);
    EXPECT_EQ(spec.bindings.at("subject_a"), "an");
}

TEST(Build, EveryTemplateAppearsInAThousandDraws) {
    for (auto bank : template_bank_names()) {
        const auto patterns = template_bank(bank);
        std::set<int> seen;
        Bindings plain;
        std::map<std::string, CaptionPair, std::less<>> captioned;
        for (const auto& p : placeholders(patterns.front())) {
            const bool article = p.ends_with("_a") && p != "color_a";
            if (article) continue;
            if (p == "subject" || p == "new_subject" || p == "bg_subject") {
                captioned[p] = {"a cat", "a cat on a mat"};
            } else {
                plain[p] = "x";
            }
        }
        Rng rng(RngState{99, 0});
        for (int i = 0; i < 1000; ++i) seen.insert(build_instruction(bank, plain, captioned, rng).template_index);
        EXPECT_EQ(seen.size(), patterns.size()) << bank;
    }
}

TEST(Build, BothVerbositiesOccur) {
    std::set<Verbosity> seen;
    Rng rng(RngState{4, 4});
    for (int i = 0; i < 100; ++i) seen.insert(build_instruction("remove", {}, {{"subject", {"a cat", "a cat"}}}, rng).verbosity);
    EXPECT_EQ(seen.size(), 2u);
    EXPECT_EQ(verbosity_from_string(to_string(Verbosity::detailed)), Verbosity::detailed);
}
