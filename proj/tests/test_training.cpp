#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gforge/training.hpp"

using namespace gforge;

namespace {

constexpr double kLn2 = 0.6931471805599453;

PolicyTable single_context_table(const std::vector<double>& probs) {
    std::vector<std::string> words;
    for (size_t i = 0; i < probs.size(); ++i) words.push_back("g" + std::to_string(i));
    Vocabulary vocab(words);
    std::vector<std::vector<int>> guidances;
    for (size_t i = 0; i < probs.size(); ++i) guidances.push_back({static_cast<int>(i)});
    PolicyTable::Context ctx{"ctx", guidances, {}};
    ctx.logits.resize(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) ctx.logits[i] = std::log(probs[i]);
    return PolicyTable(vocab, {ctx});
}

PolicyTable uniform_table(size_t n) {
    return single_context_table(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

std::vector<PreferencePair> simple_pairs(const PolicyTable& table, size_t pos, size_t neg,
                                         int count = 1) {
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < count; ++i)
        pairs.push_back(PreferencePair{
            "t", "ctx", "",
            make_guidance(table.contexts()[0].guidances[pos], table.vocab()),
            make_guidance(table.contexts()[0].guidances[neg], table.vocab())});
    return pairs;
}

TrainConfig config_with(double eta, double eps, double lr = 0.1, int epochs = 10) {
    TrainConfig cfg;
    cfg.eta = eta;
    cfg.label_smoothing = eps;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    return cfg;
}

}  // namespace

TEST_CASE("bt_probability is the logistic of the utility gap") {
    CHECK(bt_probability(0.3, 0.3) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(bt_probability(1.0, 0.0) == doctest::Approx(0.731059).epsilon(1e-6));
    RandomSource rng(1, 1);
    for (int i = 0; i < 1000; ++i) {
        double a = 4.0 * rng.next_double() - 2.0;
        double b = 4.0 * rng.next_double() - 2.0;
        CHECK(bt_probability(a, b) + bt_probability(b, a) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sft loss: perfect fit scores zero") {
    TokenPolicy p(Vocabulary({"a"}), 1, 2);
    p.start_logits()[0] = 1000.0;   // all mass on the target token
    p.bigram_logits()[0][0] = 1000.0;
    LossGrad<TokenPolicy> lg = sft_loss(p, {{"c", "", {0, 0}}});
    CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sft loss: uniform four-symbol alphabet, length-2 target") {
    // alphabet {a, b, c, end}, forced stop at max_len = 2
    TokenPolicy p(Vocabulary({"a", "b", "c"}), 1, 2);
    REQUIRE(p.vocab_size() == 4);
    LossGrad<TokenPolicy> lg = sft_loss(p, {{"c", "", {0, 1}}});
    CHECK(lg.loss == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));
    CHECK(lg.loss == doctest::Approx(2.772589).epsilon(1e-6));
}

TEST_CASE("sft gradient matches central finite differences") {
    RandomSource rng(21, 0);
    TokenPolicy p(Vocabulary({"a", "b", "c"}), 2, 3);
    for (double* x : p.param_ptrs()) *x = 2.0 * rng.next_double() - 1.0;
    std::vector<SftExample> examples = {{"u", "", {0, 1, 2}}, {"v", "", {2}}};
    std::function<LossGrad<TokenPolicy>(const TokenPolicy&)> obj =
        [&](const TokenPolicy& q) { return sft_loss(q, examples); };
    GradCheckReport report = check_gradients<TokenPolicy>(p, obj);
    CHECK(report.pass);
    CHECK(report.max_rel_err <= 1e-5);
}

TEST_CASE("closed-form policy: eta 0 and constant utilities reproduce the reference") {
    PolicyTable ref = single_context_table({0.6, 0.3, 0.1});
    PolicyTable zero_eta = closed_form_policy(ref, {{1.0, 0.2, -0.4}}, 0.0);
    PolicyTable constant = closed_form_policy(ref, {{0.7, 0.7, 0.7}}, 2.5);
    auto ref_probs = ref.probs("ctx");
    auto a = zero_eta.probs("ctx");
    auto b = constant.probs("ctx");
    for (size_t i = 0; i < ref_probs.size(); ++i) {
        CHECK(a[i] == doctest::Approx(ref_probs[i]).epsilon(1e-12));
        CHECK(b[i] == doctest::Approx(ref_probs[i]).epsilon(1e-12));
    }
}

TEST_CASE("closed-form policy: uniform reference with u=[1,0]") {
    PolicyTable ref = uniform_table(2);
    PolicyTable opt = closed_form_policy(ref, {{1.0, 0.0}}, 1.0);
    auto probs = opt.probs("ctx");
    CHECK(probs[0] == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(probs[1] == doctest::Approx(0.268941).epsilon(1e-6));
}

TEST_CASE("closed-form policy is invariant to constant utility shifts") {
    RandomSource rng(22, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> probs = {0.2, 0.5, 0.3};
        PolicyTable ref = single_context_table(probs);
        std::vector<double> u = {rng.next_double(), rng.next_double(), rng.next_double()};
        std::vector<double> shifted = u;
        const double c = 10.0 * rng.next_double() - 5.0;
        for (double& x : shifted) x += c;
        auto base = closed_form_policy(ref, {u}, 1.7).probs("ctx");
        auto moved = closed_form_policy(ref, {shifted}, 1.7).probs("ctx");
        for (size_t i = 0; i < base.size(); ++i)
            CHECK(std::abs(base[i] - moved[i]) <= 1e-12);
    }
}

TEST_CASE("kl divergence basics") {
    PolicyTable p = single_context_table({1.0, 0.0});
    PolicyTable q = uniform_table(2);
    CHECK(kl_divergence(p, p, "ctx") == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl_divergence(p, q, "ctx") == doctest::Approx(kLn2).epsilon(1e-12));
    CHECK_THROWS_AS(kl_divergence(q, p, "ctx"), SupportError);

    RandomSource rng(23, 0);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> a = {rng.next_double() + 0.01, rng.next_double() + 0.01,
                                 rng.next_double() + 0.01};
        std::vector<double> b = {rng.next_double() + 0.01, rng.next_double() + 0.01,
                                 rng.next_double() + 0.01};
        double za = a[0] + a[1] + a[2], zb = b[0] + b[1] + b[2];
        for (double& x : a) x /= za;
        for (double& x : b) x /= zb;
        CHECK(kl_divergence(single_context_table(a), single_context_table(b), "ctx") >= -1e-12);
    }
}

TEST_CASE("closed form maximizes the KL-regularized objective on random fixtures") {
    RandomSource rng(24, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const size_t n = 2 + rng.next_below(4);
        std::vector<double> ref_probs(n);
        double z = 0.0;
        for (double& x : ref_probs) {
            x = rng.next_double() + 0.05;
            z += x;
        }
        for (double& x : ref_probs) x /= z;
        std::vector<double> u(n);
        for (double& x : u) x = 2.0 * rng.next_double() - 1.0;
        const double eta = 0.5 + rng.next_double();

        PolicyTable ref = single_context_table(ref_probs);
        PolicyTable opt = closed_form_policy(ref, {u}, eta);
        const double star = kl_objective_value(opt.probs("ctx"), ref_probs, u, eta);
        CHECK(star >= kl_objective_value(ref_probs, ref_probs, u, eta) - 1e-10);
        for (int k = 0; k < 100; ++k) {
            std::vector<double> probs(n);
            double zz = 0.0;
            for (double& x : probs) {
                x = rng.next_double() + 1e-3;
                zz += x;
            }
            for (double& x : probs) x /= zz;
            CHECK(star >= kl_objective_value(probs, ref_probs, u, eta) - 1e-10);
        }
        CHECK(std::isfinite(kl_divergence(opt, ref, "ctx")));
    }
}

TEST_CASE("dpo loss at the reference is ln 2 for any pairs and smoothing") {
    for (double eps : {0.0, 0.1, 0.3, 0.49}) {
        PolicyTable policy = single_context_table({0.2, 0.5, 0.3});
        PolicyTable reference = clone_frozen(policy);
        std::vector<PreferencePair> pairs = simple_pairs(policy, 0, 2, 3);
        LossGrad<PolicyTable> lg = dpo_loss(policy, reference, pairs, config_with(1.3, eps));
        CHECK(std::abs(lg.loss - kLn2) <= 1e-12);
    }
    // token policy anchor
    TokenPolicy p(Vocabulary({"a", "b"}), 2, 2);
    RandomSource rng(25, 0);
    for (double* x : p.param_ptrs()) *x = rng.next_double();
    TokenPolicy ref = clone_frozen(p);
    std::vector<PreferencePair> pairs = {
        {"t", "c", "", make_guidance({0, 1}, p.guidance_vocab()),
         make_guidance({1}, p.guidance_vocab())}};
    LossGrad<TokenPolicy> lg = dpo_loss(p, ref, pairs, config_with(0.7, 0.25));
    CHECK(std::abs(lg.loss - kLn2) <= 1e-12);
}

TEST_CASE("dpo loss on the worked tabular fixture") {
    const double sigma1 = 1.0 / (1.0 + std::exp(-1.0));
    PolicyTable policy = single_context_table({sigma1, 1.0 - sigma1});
    PolicyTable reference = uniform_table(2);
    LossGrad<PolicyTable> lg =
        dpo_loss(policy, reference, simple_pairs(policy, 0, 1), config_with(1.0, 0.0));
    CHECK(lg.loss == doctest::Approx(0.313262).epsilon(1e-6));
}

TEST_CASE("dpo loss is monotone in the margin") {
    // unsmoothed: strictly decreasing everywhere
    auto loss_at = [&](double z, double eps) {
        return -(1.0 - eps) * log_sigmoid(z) - eps * log_sigmoid(-z);
    };
    RandomSource rng(26, 0);
    for (int i = 0; i < 200; ++i) {
        double z1 = 8.0 * rng.next_double() - 4.0;
        double z2 = 8.0 * rng.next_double() - 4.0;
        if (z1 > z2) std::swap(z1, z2);
        if (z2 - z1 < 1e-9) continue;
        CHECK(loss_at(z1, 0.0) > loss_at(z2, 0.0));
    }
    // smoothed: decreasing below the optimum margin log((1-eps)/eps)
    const double eps = 0.1;
    const double cap = std::log((1.0 - eps) / eps);
    for (int i = 0; i < 200; ++i) {
        double z1 = (cap + 4.0) * rng.next_double() - 4.0;
        double z2 = (cap + 4.0) * rng.next_double() - 4.0;
        if (z1 > z2) std::swap(z1, z2);
        if (z2 > cap || z2 - z1 < 1e-9) continue;
        CHECK(loss_at(z1, eps) > loss_at(z2, eps));
    }
}

TEST_CASE("dpo gradient matches central finite differences on the token policy") {
    RandomSource rng(27, 0);
    TokenPolicy p(Vocabulary({"a", "b", "c"}), 2, 3);
    TokenPolicy ref(Vocabulary({"a", "b", "c"}), 2, 3);
    for (double* x : p.param_ptrs()) *x = 2.0 * rng.next_double() - 1.0;
    for (double* x : ref.param_ptrs()) *x = 2.0 * rng.next_double() - 1.0;
    std::vector<PreferencePair> pairs = {
        {"t1", "u", "", make_guidance({0, 1}, p.guidance_vocab()),
         make_guidance({1, 0}, p.guidance_vocab())},
        {"t2", "v", "", make_guidance({2}, p.guidance_vocab()),
         make_guidance({0, 2, 1}, p.guidance_vocab())}};
    TrainConfig cfg = config_with(0.8, 0.1);
    std::function<LossGrad<TokenPolicy>(const TokenPolicy&)> obj =
        [&](const TokenPolicy& q) { return dpo_loss(q, ref, pairs, cfg); };
    GradCheckReport report = check_gradients<TokenPolicy>(p, obj);
    CHECK(report.pass);
    CHECK(report.max_rel_err <= 1e-5);
}

TEST_CASE("dpo rejects unsupported reference guidances") {
    PolicyTable policy = uniform_table(2);
    PolicyTable reference = single_context_table({1.0, 0.0});
    std::vector<PreferencePair> pairs = simple_pairs(policy, 1, 0);
    CHECK_THROWS_AS(dpo_loss(policy, reference, pairs, config_with(1.0, 0.0)), SupportError);
}

TEST_CASE("zero learning rate leaves parameters unchanged with a flat history") {
    PolicyTable policy = single_context_table({0.4, 0.6});
    PolicyTable reference = clone_frozen(policy);
    std::vector<PreferencePair> pairs = simple_pairs(policy, 0, 1);
    TrainConfig cfg = config_with(1.0, 0.0, 0.0, 5);
    TrainResult<PolicyTable> result = train_dpo(policy, reference, pairs, cfg);
    for (double loss : result.loss_history)
        CHECK(loss == doctest::Approx(result.loss_history.front()).epsilon(1e-15));
    auto before = policy.probs("ctx");
    auto after = result.policy.probs("ctx");
    for (size_t i = 0; i < before.size(); ++i)
        CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-15));
}

TEST_CASE("sft drives a separable single example below 1e-3 within 500 epochs") {
    TokenPolicy p(Vocabulary({"a"}), 2, 1);
    std::vector<SftExample> examples = {{"ctx", "", {0}}};
    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 500;
    cfg.label_smoothing = 0.0;
    TrainResult<TokenPolicy> result = train_sft(std::move(p), examples, cfg);
    CHECK(sft_loss(result.policy, examples).loss < 1e-3);
    for (size_t i = 1; i < result.loss_history.size(); ++i)
        CHECK(result.loss_history[i] < result.loss_history[i - 1]);
}

TEST_CASE("full-batch dpo descent is monotone at small steps") {
    PolicyTable policy = uniform_table(3);
    PolicyTable reference = clone_frozen(policy);
    std::vector<PreferencePair> pairs = simple_pairs(policy, 0, 1, 2);
    auto more = simple_pairs(policy, 0, 2, 1);
    pairs.insert(pairs.end(), more.begin(), more.end());
    TrainConfig cfg = config_with(1.0, 0.1, 0.1, 200);
    TrainResult<PolicyTable> result = train_dpo(policy, reference, pairs, cfg);
    for (size_t i = 1; i < result.loss_history.size(); ++i)
        CHECK(result.loss_history[i] <= result.loss_history[i - 1] + 1e-12);
    CHECK(result.loss_history.front() == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("minibatch training is deterministic under the config seed") {
    PolicyTable policy = uniform_table(4);
    PolicyTable reference = clone_frozen(policy);
    std::vector<PreferencePair> pairs = simple_pairs(policy, 0, 1, 4);
    auto extra = simple_pairs(policy, 2, 3, 3);
    pairs.insert(pairs.end(), extra.begin(), extra.end());
    TrainConfig cfg = config_with(1.0, 0.0, 0.05, 20);
    cfg.batch_size = 3;
    cfg.seed = 99;
    TrainResult<PolicyTable> a = train_dpo(policy, reference, pairs, cfg);
    TrainResult<PolicyTable> b = train_dpo(policy, reference, pairs, cfg);
    CHECK(a.loss_history == b.loss_history);
    auto pa = a.policy.probs("ctx");
    auto pb = b.policy.probs("ctx");
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-15));
}

TEST_CASE("training surfaces divergence with the failing epoch") {
    PolicyTable policy = uniform_table(2);
    auto calls = std::make_shared<int>(0);
    std::function<LossGrad<PolicyTable>(const PolicyTable&, const std::vector<size_t>&)> objective =
        [calls](const PolicyTable& p, const std::vector<size_t>&) {
            LossGrad<PolicyTable> lg;
            lg.grad = p.zeros_like();
            lg.loss = (*calls)++ < 3 ? 1.0 : std::nan("");
            return lg;
        };
    TrainConfig cfg = config_with(1.0, 0.0, 0.1, 10);
    try {
        train<PolicyTable>(policy, 4, objective, cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch == 3);
        CHECK(std::string(e.what()).find("epoch 3") != std::string::npos);
    }
}

TEST_CASE("collection defaults follow the sampling recipe") {
    IgoOptions options;
    CHECK(options.repetitions == 10);
    CHECK(options.max_turns == 1);
    CHECK(options.temperature == doctest::Approx(1.0));
    CHECK(options.max_pairs_per_task == 2);
    CHECK(options.expert_fallback);
}

TEST_CASE("no contrast available raises NoPairsError") {
    PolicyTable policy = uniform_table(2);
    PolicyTable reference = clone_frozen(policy);
    CHECK_THROWS_AS(train_dpo(policy, reference, {}, config_with(1.0, 0.0)), NoPairsError);

    // a policy that already solves every task yields no negatives to pair
    ChainArithEnv env(ChainArithConfig{2, 2, 2, 9, 4});
    RandomSource task_rng(606, 0);
    std::vector<Task> tasks = env.generate_tasks(10, task_rng);
    PolicyTable expertish = make_tabular_policy(env, tasks, true);
    std::vector<PolicyTable::Context> contexts = expertish.contexts();
    for (const auto& task : tasks) {
        Guidance expert = env.expert_guidance(task);
        for (auto& ctx : contexts)
            for (size_t i = 0; i < ctx.guidances.size(); ++i)
                if (ctx.guidances[i] == expert.tokens &&
                    ctx.key.rfind(env.context_key(task), 0) == 0)
                    ctx.logits[i] = 50.0;
    }
    PolicyTable solver(env.guidance_vocab(), contexts);
    IgoOptions options;
    options.temperature = 0.0;
    options.expert_fallback = false;
    RandomSource rng(606, 1);
    CHECK_THROWS_AS(
        igo_iteration(solver, env, tasks, GuidanceDataset{}, config_with(1.0, 0.1), options, rng),
        NoPairsError);
}

TEST_CASE("igo iteration: first loss is ln 2 and datasets grow") {
    ChainArithEnv env(ChainArithConfig{2, 2, 2, 9, 4});
    RandomSource task_rng(404, 0);
    std::vector<Task> tasks = env.generate_tasks(20, task_rng);
    TokenPolicy policy = make_token_policy(env, 16);

    TrainConfig cfg = config_with(1.0, 0.1, 0.3, 40);
    IgoOptions options;
    options.repetitions = 4;
    options.max_turns = 1;

    GuidanceDataset dataset;
    RandomSource rng(404, 1);
    size_t last_pos = 0, last_neg = 0;
    for (int round = 1; round <= 3; ++round) {
        IgoResult<TokenPolicy> result =
            igo_iteration(policy, env, tasks, dataset, cfg, options, rng);
        CHECK(std::abs(result.loss_history.front() - kLn2) <= 1e-12);
        CHECK(result.dataset.iteration == round - 1);
        CHECK(result.dataset.positive_count() >= last_pos);
        CHECK(result.dataset.negative_count() >= last_neg);
        last_pos = result.dataset.positive_count();
        last_neg = result.dataset.negative_count();
        policy = std::move(result.policy);
        dataset = std::move(result.dataset);
    }
    CHECK(last_pos > 0);
}

TEST_CASE("dpo recovers the closed-form optimum from sampled preferences") {
    RandomSource rng(505, 0);
    DpoRecoveryReport flat = verify_dpo_recovers_optimum({0.4, 0.4}, 1.0, 4000, rng);
    CHECK(flat.total_variation <= 0.02);  // no signal, stays uniform

    DpoRecoveryReport two = verify_dpo_recovers_optimum({1.0, 0.0}, 1.0, 10000, rng.derive("a"));
    CHECK(two.total_variation <= 0.05);
    CHECK(two.target_probs[0] == doctest::Approx(0.731059).epsilon(1e-6));

    // doubling the sample size does not hurt the median accuracy
    std::vector<double> tv_small, tv_large;
    for (uint64_t s = 0; s < 10; ++s) {
        tv_small.push_back(
            verify_dpo_recovers_optimum({1.0, 0.0}, 1.0, 2000, rng.derive("half", s), 400, 0.5)
                .total_variation);
        tv_large.push_back(
            verify_dpo_recovers_optimum({1.0, 0.0}, 1.0, 4000, rng.derive("full", s), 400, 0.5)
                .total_variation);
    }
    std::sort(tv_small.begin(), tv_small.end());
    std::sort(tv_large.begin(), tv_large.end());
    CHECK(tv_large[5] <= tv_small[5] + 1e-9);
}
