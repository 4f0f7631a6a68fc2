#pragma once
// Deployment-time behavior: closed-loop refinement with a bounded attempt
// budget, metric evaluation over task sets, and plug-and-play evaluation of a
// frozen policy against alternative generator backends.

#include <string>
#include <vector>

#include "gforge/environment.hpp"
#include "gforge/interaction.hpp"
#include "gforge/metrics.hpp"
#include "gforge/policy.hpp"

namespace gforge {

struct InferenceConfig {
    int closed_loop_turns = 1;  // M; 1 is open-loop
    int max_reflections = 6;    // retry cap; total attempts <= max_reflections + 1
    double temperature = 0.0;

    void validate() const;
    int attempt_budget() const;
};

// Same loop shape as a training rollout, but with inference defaults: at most
// min(M, max_reflections + 1) attempts, each one re-sampling from the
// feedback-extended context. Exhausting the budget returns the last (failed)
// response rather than throwing.
template <class P>
std::pair<GeneratorResponse, Trajectory> closed_loop_infer(const P& policy, const Environment& env,
                                                           const Task& task,
                                                           const InferenceConfig& config) {
    config.validate();
    // temperature 0 is deterministic; a positive temperature draws from a
    // stream keyed by the task so evaluation stays reproducible
    RandomSource rng(fnv1a(task.id), fnv1a("closed-loop"));
    Trajectory traj;
    traj.task_id = task.id;
    traj.prompt = task.prompt;
    traj.context = env.context_key(task);
    std::string context = traj.context;
    GeneratorResponse last;
    for (int attempt = 1; attempt <= config.attempt_budget(); ++attempt) {
        Guidance g = policy.sample(context, config.temperature, rng);
        g.turn = attempt;
        last = env.step(task, g);
        const int signal = last.utility.value >= 1.0 ? 1 : 0;
        traj.steps.push_back({std::move(g), make_observation(signal, last.answer, last.feedback)});
        if (signal == 1) {
            traj.terminated_positive = true;
            break;
        }
        context = revision_context_key(traj.context, env.feedback_bucket(*last.feedback));
    }
    return {last, traj};
}

// Runs closed-loop inference on every task and aggregates metrics by task
// kind: success rate always, exact-match accuracy where ground truths exist,
// macro F1 where the environment publishes a label set, MAE/RMSE when all
// answers and truths parse as integers.
template <class P>
MetricReport evaluate(const P& policy, const Environment& env, const std::vector<Task>& tasks,
                      const InferenceConfig& config);

MetricReport evaluate(const PolicyTable& policy, const Environment& env,
                      const std::vector<Task>& tasks, const InferenceConfig& config);
MetricReport evaluate(const TokenPolicy& policy, const Environment& env,
                      const std::vector<Task>& tasks, const InferenceConfig& config);

// Evaluates one frozen policy against several generator backends sharing the
// task structure. The policy is checksummed before and after; any parameter
// drift is a hard error, as is a vocabulary mismatch between backends.
template <class P>
std::vector<MetricReport> plug_and_play(const P& policy,
                                        const std::vector<const Environment*>& envs,
                                        const std::vector<Task>& tasks,
                                        const InferenceConfig& config) {
    if (envs.empty()) throw EnvError("plug_and_play requires at least one backend");
    for (const Environment* env : envs) {
        if (!(env->guidance_vocab() == envs.front()->guidance_vocab()))
            throw CompatibilityError("generator backends disagree on the guidance vocabulary");
        if (env->kind() != envs.front()->kind())
            throw CompatibilityError("generator backends disagree on the task kind");
    }
    const uint64_t before = policy_checksum(policy);
    std::vector<MetricReport> reports;
    for (const Environment* env : envs) reports.push_back(evaluate(policy, *env, tasks, config));
    if (policy_checksum(policy) != before)
        throw CompatibilityError("policy parameters changed during evaluation");
    return reports;
}

}  // namespace gforge
