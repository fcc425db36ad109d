#include <gtest/gtest.h>

#include <openssl/sha.h>

#include "support.hpp"

using namespace prompt_siege;
using ps_test::path_clip;

TEST(Prompt, RejectsBlankText) {
    EXPECT_THROW(Prompt("   \t", PromptOrigin::expanded, 1), ValidationError);
    EXPECT_THROW(Prompt::initial(""), ValidationError);
}

TEST(Prompt, RoundZeroExactlyForInitial) {
    EXPECT_THROW(Prompt("a person walks", PromptOrigin::initial, 1), ValidationError);
    EXPECT_THROW(Prompt("a person walks", PromptOrigin::refined, 0), ValidationError);
    EXPECT_NO_THROW(Prompt("a person walks", PromptOrigin::refined, 2));
}

TEST(Prompt, IdIsStableAndProvenanceSensitive) {
    const Prompt a("a person walks", PromptOrigin::refined, 2);
    const Prompt b("a person walks", PromptOrigin::refined, 2);
    EXPECT_EQ(a.id(), b.id());
    EXPECT_EQ(a.id().size(), 16u);
    EXPECT_NE(a.id(), Prompt("a person walks", PromptOrigin::updated, 2).id());
    EXPECT_NE(a.id(), Prompt("a person walks", PromptOrigin::refined, 4).id());
}

TEST(MotionClip, ValidatesShape) {
    EXPECT_THROW(MotionClip(1, 1, 20, {0, 0, 0}), ValidationError);
    EXPECT_THROW(MotionClip(2, 0, 20, {}), ValidationError);
    EXPECT_THROW(MotionClip(2, 1, 0, std::vector<double>(6)), ValidationError);
    EXPECT_THROW(MotionClip(2, 1, 20, std::vector<double>(5)), ValidationError);
    std::vector<double> bad(6, 0.0);
    bad[4] = std::nan("");
    EXPECT_THROW(MotionClip(2, 1, 20, bad), ValidationError);
    bad[4] = INFINITY;
    EXPECT_THROW(MotionClip(2, 1, 20, bad), ValidationError);
}

TEST(MotionClip, IdDependsOnContentOnly) {
    const auto a = path_clip({{0, 0, 0}, {1, 0, 0}});
    const auto b = path_clip({{0, 0, 0}, {1, 0, 0}}).with_source("abc");
    EXPECT_EQ(a.id(), b.id());
    EXPECT_EQ(a, b);
    EXPECT_EQ(b.source_prompt_id(), "abc");
    EXPECT_NE(a.id(), path_clip({{0, 0, 0}, {1, 0, 0}}, 2.0).id());
    EXPECT_NE(a.id(), path_clip({{0, 0, 0}, {1, 0, 1e-12}}).id());
}

TEST(FeatureVector, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(FeatureVector({}, FeatureSpace::motion), ValidationError);
    EXPECT_THROW(FeatureVector({1.0, std::nan("")}, FeatureSpace::text), ValidationError);
}

TEST(AttackConfig, DefaultsMatchEvaluationSetup) {
    const AttackConfig c;
    EXPECT_EQ(c.K, 50u);
    EXPECT_EQ(c.N, 20u);
    EXPECT_DOUBLE_EQ(c.eta, 0.4);
    EXPECT_EQ(c.llm_retry_limit, 3u);
    EXPECT_EQ(c.score_decimals, 4u);
    EXPECT_FALSE(c.max_victim_queries);
    EXPECT_NO_THROW(validate_config(c));
}

TEST(AttackConfig, BoundaryAndInvalidValues) {
    AttackConfig c;
    c.K = 1;
    c.N = 1;
    c.eta = 0.0;
    EXPECT_NO_THROW(validate_config(c));
    c.eta = 1.0;
    EXPECT_NO_THROW(validate_config(c));

    AttackConfig k0;
    k0.K = 0;
    try {
        validate_config(k0);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_STREQ(e.what(), "K must be ≥ 1");
    }
    AttackConfig n0;
    n0.N = 0;
    EXPECT_THROW(validate_config(n0), ConfigError);
    AttackConfig e;
    e.eta = 1.5;
    EXPECT_THROW(validate_config(e), ConfigError);
    e.eta = std::nan("");
    EXPECT_THROW(validate_config(e), ConfigError);
}

TEST(AttackConfig, JsonRoundTripAndUnknownKeys) {
    AttackConfig c;
    c.K = 3;
    c.max_victim_queries = 17;
    c.initial_prompt = "a person waves";
    EXPECT_EQ(attack_config_from_json(to_json_value(c)), c);
    EXPECT_THROW(attack_config_from_json(json{{"k", 3}}), ConfigError);
}

TEST(ScoredPrompt, SimilarityRange) {
    const auto p = Prompt::initial("x");
    EXPECT_NO_THROW(ScoredPrompt(p, 1.0 + 1e-10, -1.0, "r"));
    EXPECT_THROW(ScoredPrompt(p, 1.01, 0.0, "r"), ValidationError);
    EXPECT_THROW(ScoredPrompt(p, 0.0, std::nan(""), "r"), ValidationError);
}

TEST(AgentState, ScoresPresentExactlyAfterRefinement) {
    const std::vector<Prompt> ps{Prompt("a", PromptOrigin::refined, 2)};
    EXPECT_THROW(AgentState(2, StateParity::post_refinement, ps), ValidationError);
    EXPECT_THROW(AgentState(1, StateParity::post_expansion_or_update, ps, std::vector<ScoredPrompt>{}), ValidationError);
    EXPECT_THROW(AgentState(0, StateParity::post_refinement, {}, std::vector<ScoredPrompt>{}), ValidationError);
    EXPECT_THROW(AgentState(0, StateParity::pre_expansion, {Prompt::initial("a"), Prompt::initial("b")}), ValidationError);
}

namespace {

AttackRunRecord empty_record() {
    return AttackRunRecord(AttackConfig{}, Prompt::initial("a person jumps"), path_clip({{0, 0, 0}, {0, 1, 0}}),
                           RunMethod::agent, {{"expand", "v1"}});
}

VictimQuery query_at(std::uint64_t step, std::string text) {
    return VictimQuery{step, "pid", std::move(text), 1, true, "clip", ""};
}

}  // namespace

TEST(Ledger, FirstStateOnEmptyRecord) {
    auto r = ledger_append(empty_record(), AgentState(0, StateParity::pre_expansion, {Prompt::initial("a person waves")}));
    EXPECT_EQ(r.states().size(), 1u);
    EXPECT_EQ(r.victim_queries(), 0u);
    EXPECT_EQ(r.llm_calls(), 0u);
}

TEST(Ledger, QueryEventIncrementsCounter) {
    auto r = empty_record();
    r.append(AgentState(0, StateParity::pre_expansion, {Prompt::initial("a person waves")}));
    r.append(query_at(1, "x"));
    EXPECT_EQ(r.victim_queries(), 1u);
    r = ledger_append(r, query_at(1, "y"));
    EXPECT_EQ(r.victim_queries(), 2u);
}

TEST(Ledger, RejectsOutOfOrderStates) {
    auto r = empty_record();
    r.append(AgentState(0, StateParity::pre_expansion, {Prompt::initial("a")}));
    r.append(AgentState(1, StateParity::post_expansion_or_update, {Prompt("b", PromptOrigin::expanded, 1)}));
    r.append(AgentState(2, StateParity::post_refinement, {Prompt("c", PromptOrigin::refined, 2)}, std::vector<ScoredPrompt>{}));
    EXPECT_THROW(r.append(AgentState(2, StateParity::post_expansion_or_update, {Prompt("d", PromptOrigin::updated, 2)})),
                 LedgerError);
    EXPECT_THROW(r.append(query_at(1, "late")), LedgerError);
}

TEST(Ledger, FinishEnforcesConstraintAndClosesRecord) {
    auto r = empty_record();
    r.append(AgentState(0, StateParity::pre_expansion, {Prompt::initial("a")}));
    ScoredPrompt infeasible(Prompt("b", PromptOrigin::refined, 2), 0.9, 0.5, "r");
    EXPECT_THROW(r.finish(RunStatus::completed, infeasible), LedgerError);
    EXPECT_THROW(r.finish(RunStatus::completed, std::nullopt), LedgerError);
    r.finish(RunStatus::no_feasible_prompt, std::nullopt);
    EXPECT_THROW(r.append(query_at(1, "x")), LedgerError);
}

TEST(Ledger, SerializationRoundTrip) {
    auto rec = ps_test::run_scenario("walk-to-jump", ps_test::scenario_config(3, 3, 4));
    for (bool normalize : {false, true}) {
        const auto text = ledger_to_string(rec, {normalize});
        std::istringstream in(text);
        const auto back = read_ledger(in);
        EXPECT_EQ(ledger_to_string(back, {normalize}), text);
        EXPECT_EQ(back.states(), rec.states());
        EXPECT_EQ(back.best(), rec.best());
        EXPECT_EQ(back.queries().size(), rec.queries().size());
    }
}

TEST(Ledger, ReaderChecksVersionAndCounters) {
    auto rec = ps_test::run_scenario("walk-to-jump", ps_test::scenario_config(3, 1, 2));
    auto text = ledger_to_string(rec, {true});
    {
        auto bad = text;
        bad.replace(bad.find(kFormatVersion), kFormatVersion.size(), "prompt-siege/0");
        std::istringstream in(bad);
        EXPECT_THROW(read_ledger(in), LedgerError);
    }
    {
        auto bad = text;
        const std::string key = "\"victim_queries\":" + std::to_string(rec.victim_queries());
        bad.replace(bad.rfind(key), key.size(), "\"victim_queries\":999");
        std::istringstream in(bad);
        EXPECT_THROW(read_ledger(in), LedgerError);
    }
}

TEST(MotionIo, RoundTripIsBitExact) {
    std::mt19937_64 rng(5);
    const auto clip = ps_test::random_clip(rng, 9, 4);
    std::stringstream ss;
    write_clip(ss, clip);
    const auto back = read_clip(ss);
    EXPECT_EQ(back, clip);
    EXPECT_EQ(back.id(), clip.id());
    std::istringstream junk("not a clip\n");
    EXPECT_THROW(read_clip(junk), Error);
}

TEST(Hashing, KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, SeedForIsLow64OfDigestOverSeedAndText) {
    // Independent recomputation with the one-shot OpenSSL API.
    for (std::uint64_t run_seed : {0ull, 1ull, 0x0123456789abcdefull}) {
        for (std::string text : {"a person walks", "", "ünïcode"}) {
            std::string buf;
            for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((run_seed >> (8 * i)) & 0xff));
            buf += text;
            unsigned char md[SHA256_DIGEST_LENGTH];
            SHA256(reinterpret_cast<const unsigned char*>(buf.data()), buf.size(), md);
            std::uint64_t expected = 0;
            for (int i = 24; i < 32; ++i) expected = (expected << 8) | md[i];
            EXPECT_EQ(seed_for(run_seed, text), expected);
        }
    }
}

TEST(Hashing, SeedForCollisionScan) {
    std::vector<std::string> corpus;
    for (int i = 0; i < 10000; ++i) corpus.push_back("a person moves variant " + std::to_string(i));
    std::set<std::uint64_t> by_seed, by_text;
    for (const auto& t : corpus) {
        EXPECT_EQ(seed_for(11, t), seed_for(11, t));
        by_seed.insert(seed_for(11, t));
        by_seed.insert(seed_for(12, t));
        auto edited = t;
        edited[0] = 'A';
        by_text.insert(seed_for(11, t));
        by_text.insert(seed_for(11, edited));
    }
    EXPECT_EQ(by_seed.size(), 2 * corpus.size());
    EXPECT_EQ(by_text.size(), 2 * corpus.size());
}
