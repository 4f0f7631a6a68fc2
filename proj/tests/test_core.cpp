#include "doctest.h"
#include "gforge/core.hpp"
#include "gforge/rng.hpp"

using namespace gforge;

TEST_CASE("render_guidance joins words by lookup") {
    Vocabulary vocab({"a", "b", "c"});
    CHECK(render_guidance({2, 0, 1}, vocab) == "c a b");
    CHECK_THROWS_AS(render_guidance({}, vocab), VocabError);
    CHECK_THROWS_AS(render_guidance({3}, vocab), VocabError);
}

TEST_CASE("tokenize_guidance inverts rendering") {
    Vocabulary vocab({"a", "b", "c"});
    CHECK(tokenize_guidance("c a b", vocab) == std::vector<int>{2, 0, 1});
    CHECK_THROWS_AS(tokenize_guidance("z", Vocabulary({"a"})), VocabError);
    CHECK_THROWS_AS(tokenize_guidance("", vocab), VocabError);
}

TEST_CASE("tokenize/render round-trip over seeded random sequences") {
    Vocabulary vocab({"add", "sub", "mul", "step0", "step1", "x", "y"});
    RandomSource rng(7, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t len = 1 + rng.next_below(6);
        std::vector<int> tokens;
        for (size_t i = 0; i < len; ++i)
            tokens.push_back(static_cast<int>(rng.next_below(static_cast<uint64_t>(vocab.size()))));
        CHECK(tokenize_guidance(render_guidance(tokens, vocab), vocab) == tokens);
    }
    // and the text-side inverse on a few rendered strings
    CHECK(render_guidance(tokenize_guidance("mul x y", vocab), vocab) == "mul x y");
}

TEST_CASE("vocabulary rejects duplicates and whitespace") {
    CHECK_THROWS_AS(Vocabulary({"a", "a"}), VocabError);
    CHECK_THROWS_AS(Vocabulary({"a b"}), VocabError);
}

TEST_CASE("random source is deterministic per (seed, stream)") {
    RandomSource a(123456789, 42);
    RandomSource b(123456789, 42);
    for (int i = 0; i < 10000; ++i) CHECK(a.next_u64() == b.next_u64());

    RandomSource c(123456789, 43);
    bool all_equal = true;
    RandomSource a2(123456789, 42);
    for (int i = 0; i < 100; ++i) all_equal = all_equal && (a2.next_u64() == c.next_u64());
    CHECK_FALSE(all_equal);
}

TEST_CASE("random source doubles live in [0,1) and below-n is in range") {
    RandomSource rng(1, 1);
    for (int i = 0; i < 10000; ++i) {
        double d = rng.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
        CHECK(rng.next_below(7) < 7);
    }
}

TEST_CASE("derived streams do not disturb the parent") {
    RandomSource parent(5, 9);
    RandomSource sibling(5, 9);
    RandomSource child = parent.derive("task-x", 3);
    (void)child.next_u64();
    CHECK(parent.next_u64() == sibling.next_u64());
}

TEST_CASE("task invariants") {
    Task t;
    t.id = "";
    CHECK_THROWS_AS(validate_task(t), EnvError);
    t.id = "r-1";
    t.kind = TaskKind::Reasoning;
    CHECK_THROWS_AS(validate_task(t), EnvError);  // reasoning needs ground truth
    t.ground_truth = "14";
    CHECK_NOTHROW(validate_task(t));
    Task p;
    p.id = "p-1";
    p.kind = TaskKind::Personalization;
    CHECK_THROWS_AS(validate_task(p), EnvError);  // needs a profile
    p.profile.emplace_back("item", "label");
    CHECK_NOTHROW(validate_task(p));
}

TEST_CASE("observation invariants") {
    CHECK_THROWS_AS(make_observation(1, "ok", "why"), EnvError);
    CHECK_THROWS_AS(make_observation(0, "bad", std::nullopt), EnvError);
    CHECK_NOTHROW(make_observation(0, "bad", "step 0 failed: missing operand"));
    CHECK_NOTHROW(make_observation(1, "ok", std::nullopt));
}

TEST_CASE("trajectory invariants") {
    Vocabulary vocab({"a", "b"});
    Trajectory t;
    t.task_id = "x";
    CHECK_THROWS_AS(validate_trajectory(t, 3), EnvError);  // empty
    t.steps.push_back({make_guidance({0}, vocab), make_observation(0, "no", "fb")});
    t.steps.push_back({make_guidance({1}, vocab), make_observation(1, "yes", std::nullopt)});
    t.terminated_positive = true;
    CHECK_NOTHROW(validate_trajectory(t, 2));
    CHECK_THROWS_AS(validate_trajectory(t, 1), EnvError);  // over budget
    // no step may follow a positive observation
    Trajectory bad = t;
    bad.steps.push_back({make_guidance({0}, vocab), make_observation(0, "no", "fb")});
    bad.terminated_positive = false;
    CHECK_THROWS_AS(validate_trajectory(bad, 5), EnvError);
}

TEST_CASE("utility bounds") {
    CHECK_THROWS_AS(make_utility(-0.1), EnvError);
    CHECK_THROWS_AS(make_utility(1.1), EnvError);
    CHECK(make_utility(0.5).value == doctest::Approx(0.5));
}
