#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vvae/corpus_ingest.hpp"

using namespace vvae;
using vvae::testing::session_line;
using vvae::testing::TempDir;
using vvae::testing::write_text;

namespace {

std::vector<ChatSession> sessions_for(const std::map<std::string, int>& per_agent) {
    std::vector<ChatSession> out;
    for (const auto& [agent, n] : per_agent) {
        for (int i = 0; i < n; ++i) {
            ChatSession s{agent, agent + "-" + std::to_string(i), {{TurnRole::user, "hi", 0}, {TurnRole::ai, "yo", 1}}};
            out.push_back(s);
        }
    }
    return out;
}

} // namespace

TEST(Scrub, PhoneAndEmail) {
    const auto rules = default_scrub_rules();
    EXPECT_EQ(scrub("call me at 555-123-4567", rules), "call me at [PHONE]");
    EXPECT_EQ(scrub("mail a.b@example.com now", rules), "mail [EMAIL] now");
    EXPECT_EQ(scrub("+1 415 555 0100 ok", rules), "[PHONE] ok");
    EXPECT_EQ(scrub("I am 25 years old", rules), "I am 25 years old");
}

TEST(Scrub, Idempotent) {
    const auto rules = default_scrub_rules();
    for (const char* s : {"555-123-4567 and x@y.org", "nothing here", "+44 20 7946 0958, z@q.co.uk"}) {
        const auto once = scrub(s, rules);
        EXPECT_EQ(scrub(once, rules), once);
    }
}

TEST(Scrub, RulesFromJson) {
    auto rules = scrub_rules_from_json(nlohmann::json::parse(R"([{"name":"n","pattern":"secret\\d+","replacement":"[X]"}])"));
    EXPECT_EQ(scrub("a secret42 b", rules), "a [X] b");
    EXPECT_THROW(scrub_rules_from_json(nlohmann::json::parse(R"([{"pattern":"(","replacement":""}])")), ConfigError);
}

TEST(LoadSessions, ScrubsAndSorts) {
    TempDir dir;
    const auto path = dir.file("s.jsonl");
    write_text(path, session_line("b", "s2", {{"user", "hi"}, {"ai", "my number is 555-123-4567"}}) + "\n" +
                         session_line("a", "s1", {{"user", "hey"}, {"assistant", "hello"}, {"user", "  "}}));
    const auto s = load_sessions(path, default_scrub_rules());
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].agent_id, "a");
    EXPECT_EQ(s[0].turns.size(), 2u);
    EXPECT_EQ(s[1].turns[1].text, "my number is [PHONE]");
    EXPECT_EQ(s[1].turns[1].index, 1u);
}

TEST(LoadSessions, EmptyFile) {
    TempDir dir;
    write_text(dir.file("e.jsonl"), "");
    EXPECT_TRUE(load_sessions(dir.file("e.jsonl"), default_scrub_rules()).empty());
}

TEST(LoadSessions, StrictReportsLineNumber) {
    TempDir dir;
    const auto path = dir.file("bad.jsonl");
    write_text(path, session_line("a", "s1", {{"user", "hi"}, {"ai", "yo"}}) + "{broken\n");
    try {
        load_sessions(path, {}, true);
        FAIL() << "expected IngestError";
    } catch (const IngestError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::vector<std::string> warnings;
    EXPECT_EQ(load_sessions(path, {}, false, &warnings).size(), 1u);
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Quantile, LinearInterpolation) {
    EXPECT_NEAR(quantile({10, 10, 100}, 0.95), 91.0, 1e-9);
    EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({7}, 0.3), 7.0);
    EXPECT_THROW(quantile({}, 0.5), Error);
}

TEST(Subsample, CapsHeavyAgentOnly) {
    const auto sessions = sessions_for({{"a", 10}, {"b", 10}, {"c", 100}});
    EXPECT_EQ(subsample_cap(sessions, 0.95), 91u);
    const auto out = subsample_agents(sessions, 0.95, 1);
    std::map<std::string, int> counts;
    for (const auto& s : out) ++counts[s.agent_id];
    EXPECT_EQ(counts["a"], 10);
    EXPECT_EQ(counts["b"], 10);
    EXPECT_EQ(counts["c"], 91);
    EXPECT_EQ(subsample_agents(sessions, 0.95, 1), out);
    EXPECT_NE(subsample_agents(sessions, 0.95, 2), out);
}

TEST(Subsample, IdentityCases) {
    const auto sessions = sessions_for({{"a", 3}, {"b", 17}});
    EXPECT_EQ(subsample_agents(sessions, 1.0, 9), sessions);
    const auto single = sessions_for({{"solo", 12}});
    EXPECT_EQ(subsample_agents(single, 0.5, 9), single);
    EXPECT_TRUE(subsample_agents({}, 0.5, 9).empty());
    EXPECT_THROW(subsample_agents(sessions, 0.0, 1), ConfigError);
}

TEST(Subsample, KeepsInputOrderAndIsSubset) {
    const auto sessions = sessions_for({{"a", 2}, {"b", 2}, {"c", 40}});
    const auto out = subsample_agents(sessions, 0.5, 3);
    std::size_t j = 0;
    for (const auto& s : out) {
        while (j < sessions.size() && !(sessions[j] == s)) ++j;
        ASSERT_LT(j, sessions.size());
        ++j;
    }
}

TEST(PairTargets, DefaultPairsEveryAiTurnAfterFirst) {
    ChatSession s{"a", "s",
                  {{TurnRole::user, "u0", 0}, {TurnRole::ai, "a1", 1}, {TurnRole::user, "u2", 2}, {TurnRole::ai, "a3", 3}}};
    const auto pairs = pair_targets(s);
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_EQ(pairs[0].target.index, 1u);
    EXPECT_EQ(pairs[0].context.size(), 1u);
    EXPECT_EQ(pairs[1].target.index, 3u);
    EXPECT_EQ(pairs[1].context.size(), 3u);
    EXPECT_EQ(pairs[1].context.back().text, "u2");

    ChatSession opener{"a", "o", {{TurnRole::ai, "hello", 0}, {TurnRole::user, "hi", 1}, {TurnRole::ai, "sup", 2}}};
    ASSERT_EQ(pair_targets(opener).size(), 1u);
    EXPECT_EQ(pair_targets(opener)[0].target.index, 2u);
}

TEST(PairTargets, ExplicitIndicesValidated) {
    ChatSession s{"a", "s", {{TurnRole::user, "u0", 0}, {TurnRole::ai, "a1", 1}}};
    EXPECT_EQ(pair_targets(s, std::vector<std::size_t>{1}).size(), 1u);
    EXPECT_THROW(pair_targets(s, std::vector<std::size_t>{0}), PairingError);
    EXPECT_THROW(pair_targets(s, std::vector<std::size_t>{5}), PairingError);
}

TEST(PairTargets, JsonRoundTrip) {
    ChatSession s{"a", "s", {{TurnRole::user, "u0", 0}, {TurnRole::ai, "a1", 1}}};
    const auto p = pair_targets(s)[0];
    EXPECT_EQ(pair_from_json(nlohmann::ordered_json::parse(pair_to_json(p).dump())), p);
    auto bad = pair_to_json(p);
    bad["target_index"] = 7;
    EXPECT_THROW(pair_from_json(bad), PairingError);
}

TEST(Stats, CountsTurnsAndAgents) {
    std::vector<ChatSession> sessions = {
        {"a", "1", {{TurnRole::user, "x", 0}, {TurnRole::ai, "y", 1}, {TurnRole::user, "z", 2}}},
        {"a", "2", {{TurnRole::user, "x", 0}, {TurnRole::ai, "y", 1}}},
        {"b", "3", {{TurnRole::ai, "x", 0}, {TurnRole::user, "y", 1}, {TurnRole::ai, "z", 2}, {TurnRole::user, "w", 3}}},
    };
    const auto st = stats(sessions);
    EXPECT_EQ(st.n_agents, 2u);
    EXPECT_EQ(st.n_sessions, 3u);
    EXPECT_EQ(st.n_context_utterances, 9u);
    EXPECT_EQ(st.n_ai_turns, 4u);
    EXPECT_EQ(st.n_user_turns, 5u);
    EXPECT_DOUBLE_EQ(st.avg_turns_per_dialogue, 3.0);
    EXPECT_EQ(stats({}).avg_turns_per_dialogue, 0.0);
}
