#include <cmath>

#include "doctest.h"
#include "gforge/inference.hpp"

using namespace gforge;

namespace {

// environment that succeeds only once the guidance carries the revised token;
// the base-context argmax fails, so success requires at least two attempts
class SecondTryEnv : public Environment {
public:
    SecondTryEnv() : vocab_({"first", "second"}) {}
    TaskKind kind() const override { return TaskKind::Reasoning; }
    const Vocabulary& guidance_vocab() const override { return vocab_; }
    int max_guidance_len() const override { return 1; }
    std::string context_key(const Task&) const override { return "base"; }
    int feedback_bucket(const std::string&) const override { return 0; }
    int feedback_bucket_count() const override { return 1; }
    GeneratorResponse step(const Task&, const Guidance& g) const override {
        if (vocab_.word(g.tokens[0]) == "second") return make_response("ok", 1.0, std::nullopt);
        return make_response("no", 0.0, "wrong branch");
    }

private:
    Vocabulary vocab_;
};

PolicyTable revising_policy(const SecondTryEnv& env) {
    std::vector<std::vector<int>> guidances = {{0}, {1}};
    std::vector<PolicyTable::Context> contexts = {
        {"base", guidances, {1.0, 0.0}},                         // argmax "first": fails
        {revision_context_key("base", 0), guidances, {0.0, 1.0}}  // revision succeeds
    };
    return PolicyTable(env.guidance_vocab(), contexts);
}

Task reasoning_task(const std::string& id) {
    Task t;
    t.id = id;
    t.prompt = "p-" + id;
    t.ground_truth = "ok";
    t.kind = TaskKind::Reasoning;
    return t;
}

}  // namespace

TEST_CASE("inference config caps the attempt budget") {
    InferenceConfig cfg;
    cfg.closed_loop_turns = 8;
    cfg.max_reflections = 0;
    CHECK(cfg.attempt_budget() == 1);
    cfg.max_reflections = 3;
    CHECK(cfg.attempt_budget() == 4);
    cfg.closed_loop_turns = 2;
    CHECK(cfg.attempt_budget() == 2);
    cfg.closed_loop_turns = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("open loop is a single generator call") {
    SecondTryEnv env;
    PolicyTable policy = revising_policy(env);
    InferenceConfig cfg;  // M = 1
    auto [response, traj] = closed_loop_infer(policy, env, reasoning_task("t"), cfg);
    CHECK(traj.steps.size() == 1);
    CHECK_FALSE(traj.terminated_positive);
    CHECK(response.utility.value == doctest::Approx(0.0));
}

TEST_CASE("closed loop succeeds on the revised attempt") {
    SecondTryEnv env;
    PolicyTable policy = revising_policy(env);
    InferenceConfig cfg;
    cfg.closed_loop_turns = 8;
    auto [response, traj] = closed_loop_infer(policy, env, reasoning_task("t"), cfg);
    CHECK(traj.steps.size() == 2);
    CHECK(traj.terminated_positive);
    CHECK(response.utility.value == doctest::Approx(1.0));
    // exhausted budgets return the last failure instead of throwing
    cfg.max_reflections = 0;
    auto [failed, short_traj] = closed_loop_infer(policy, env, reasoning_task("t"), cfg);
    CHECK(short_traj.steps.size() == 1);
    CHECK(failed.utility.value == doctest::Approx(0.0));
}

TEST_CASE("success rate is non-decreasing in the closed-loop budget") {
    ChainArithEnv env;
    RandomSource rng(777, 0);
    std::vector<Task> tasks = env.generate_tasks(60, rng);
    TokenPolicy policy = make_token_policy(env, 32);
    RandomSource init(778, 0);
    for (double* x : policy.param_ptrs()) *x = 0.6 * init.next_double() - 0.3;

    double last = -1.0;
    for (int m : {1, 2, 4, 8}) {
        InferenceConfig cfg;
        cfg.closed_loop_turns = m;
        cfg.max_reflections = 8;
        MetricReport report = evaluate(policy, env, tasks, cfg);
        const double rate = report.overall.at("success_rate");
        CHECK(rate >= last);
        last = rate;
    }
}

TEST_CASE("attempts never exceed min(M, reflections + 1)") {
    SecondTryEnv env;
    std::vector<std::vector<int>> guidances = {{0}, {1}};
    PolicyTable never(env.guidance_vocab(),
                      {{"base", guidances, {1.0, 0.0}},
                       {revision_context_key("base", 0), guidances, {1.0, 0.0}}});
    for (int m : {1, 3, 6, 9}) {
        for (int r : {0, 2, 5}) {
            InferenceConfig cfg;
            cfg.closed_loop_turns = m;
            cfg.max_reflections = r;
            auto [response, traj] = closed_loop_infer(never, env, reasoning_task("t"), cfg);
            CHECK(static_cast<int>(traj.steps.size()) == std::min(m, r + 1));
        }
    }
}

TEST_CASE("evaluate aggregates per kind and overall consistently") {
    ChainArithEnv env;
    RandomSource rng(779, 0);
    std::vector<Task> tasks = env.generate_tasks(40, rng);
    // expert-mimicking tabular policy: solves everything
    PolicyTable expertish = make_tabular_policy(env, tasks, true);
    {
        std::vector<PolicyTable::Context> contexts = expertish.contexts();
        for (auto& ctx : contexts) {
            for (size_t i = 0; i < ctx.guidances.size(); ++i) ctx.logits[i] = 0.0;
        }
        // bias every context toward the guidance the expert would emit
        for (const auto& task : tasks) {
            const std::string key = env.context_key(task);
            Guidance expert = env.expert_guidance(task);
            for (auto& ctx : contexts) {
                if (ctx.key != key) continue;
                for (size_t i = 0; i < ctx.guidances.size(); ++i)
                    if (ctx.guidances[i] == expert.tokens) ctx.logits[i] = 10.0;
            }
        }
        expertish = PolicyTable(env.guidance_vocab(), contexts);
    }
    InferenceConfig cfg;
    MetricReport report = evaluate(expertish, env, tasks, cfg);
    CHECK(report.overall.at("success_rate") == doctest::Approx(1.0));
    CHECK(report.overall.at("accuracy") == doctest::Approx(1.0));
    CHECK(report.sample_count == tasks.size());

    // weighted per-kind success equals the overall rate
    double weighted = 0.0;
    size_t total = 0;
    for (const auto& [kind, metrics] : report.per_kind) {
        weighted += metrics.at("success_rate") *
                    static_cast<double>(report.kind_counts.at(kind));
        total += report.kind_counts.at(kind);
    }
    CHECK(total == report.sample_count);
    CHECK(weighted / static_cast<double>(total) ==
          doctest::Approx(report.overall.at("success_rate")).epsilon(1e-12));
}

TEST_CASE("evaluate at temperature zero is reproducible") {
    ChainArithEnv env;
    RandomSource rng(780, 0);
    std::vector<Task> tasks = env.generate_tasks(30, rng);
    TokenPolicy policy = make_token_policy(env, 16);
    RandomSource init(781, 0);
    for (double* x : policy.param_ptrs()) *x = init.next_double();
    InferenceConfig cfg;
    MetricReport a = evaluate(policy, env, tasks, cfg);
    MetricReport b = evaluate(policy, env, tasks, cfg);
    CHECK(a.overall.at("success_rate") == doctest::Approx(b.overall.at("success_rate")).epsilon(1e-15));
}

TEST_CASE("plug-and-play keeps the policy frozen and rejects mismatches") {
    ChainArithEnv base;
    ChainArithEnv variant(ChainArithConfig{2, 3, 10, 99, 4});  // shifted operand range
    RandomSource rng(781, 0);
    std::vector<Task> tasks = variant.generate_tasks(30, rng);
    TokenPolicy policy = make_token_policy(base, 16);
    InferenceConfig cfg;
    std::vector<const Environment*> envs = {&base, &variant};
    const uint64_t checksum = policy_checksum(policy);
    std::vector<MetricReport> reports = plug_and_play(policy, envs, tasks, cfg);
    CHECK(reports.size() == 2);
    CHECK(policy_checksum(policy) == checksum);
    // same backend twice gives identical reports
    std::vector<const Environment*> twice = {&variant, &variant};
    std::vector<MetricReport> dup = plug_and_play(policy, twice, tasks, cfg);
    CHECK(dup[0].overall.at("success_rate") ==
          doctest::Approx(dup[1].overall.at("success_rate")).epsilon(1e-15));

    ProfileEnv other;
    std::vector<const Environment*> clash = {&base, &other};
    CHECK_THROWS_AS(plug_and_play(policy, clash, tasks, cfg), CompatibilityError);
}

TEST_CASE("evaluate reports personalization metrics") {
    ProfileEnv env;
    RandomSource rng(782, 0);
    std::vector<Task> tasks = env.generate_tasks(25, rng);
    TokenPolicy policy = make_token_policy(env, 32);
    InferenceConfig cfg;
    MetricReport report = evaluate(policy, env, tasks, cfg);
    const auto& row = report.per_kind.at("personalization");
    CHECK(row.count("accuracy") == 1);
    CHECK(row.count("macro_f1") == 1);
    CHECK(row.at("accuracy") >= 0.0);
    CHECK(row.at("macro_f1") <= 1.0);
    CHECK(row.count("mae") == 0);  // labels are not numeric
}

TEST_CASE("evaluate adds error metrics for numeric label sets") {
    ProfileEnv env(ProfileConfig{{"1", "2", "3", "4", "5"}, 5, 9});
    RandomSource rng(783, 0);
    std::vector<Task> tasks = env.generate_tasks(20, rng);
    TokenPolicy policy = make_token_policy(env, 32);
    InferenceConfig cfg;
    MetricReport report = evaluate(policy, env, tasks, cfg);
    const auto& row = report.per_kind.at("personalization");
    REQUIRE(row.count("mae") == 1);
    REQUIRE(row.count("rmse") == 1);
    CHECK(row.at("rmse") >= row.at("mae") - 1e-12);
}
