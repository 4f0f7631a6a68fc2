#pragma once
// Multi-turn rollouts against an environment and the data they produce:
// positive/negative guidance pools grown round over round by set union, and
// contrastive pairs curated from them for preference training.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gforge/core.hpp"
#include "gforge/environment.hpp"
#include "gforge/policy.hpp"
#include "gforge/rng.hpp"

namespace gforge {

struct PreferencePair {
    std::string task_id;
    std::string context;  // base policy context key for the task
    std::string prompt;
    Guidance positive;
    Guidance negative;
};

// Per-task signal pools. Entries are deduplicated by token sequence; a
// guidance may never sit in both pools of the same task (the positive side
// wins a conflict, since a newer observation supersedes an older one).
struct GuidanceDataset {
    struct TaskEntry {
        std::string context;
        std::string prompt;
        std::map<std::vector<int>, Guidance> positives;
        std::map<std::vector<int>, Guidance> negatives;
    };

    int iteration = -1;  // -1 marks the empty base dataset
    std::map<std::string, TaskEntry> tasks;

    size_t positive_count() const;
    size_t negative_count() const;
};

// Per-task extraction result prior to merging into a dataset.
struct SignalPools {
    std::map<std::string, GuidanceDataset::TaskEntry> tasks;
};

// One T-turn rollout: turn 1 samples from the task's base context; each later
// turn samples a revision from the context extended with the feedback bucket
// of the previous failure. Stops at the first positive signal.
template <class P>
Trajectory rollout(const P& policy, const Environment& env, const Task& task, int max_turns,
                   double temperature, RandomSource& rng) {
    if (max_turns < 1) throw EnvError("rollout requires at least one turn");
    Trajectory traj;
    traj.task_id = task.id;
    traj.prompt = task.prompt;
    traj.context = env.context_key(task);
    std::string context = traj.context;
    for (int turn = 1; turn <= max_turns; ++turn) {
        Guidance g = policy.sample(context, temperature, rng);
        g.turn = turn;
        GeneratorResponse response = env.step(task, g);
        const int signal = response.utility.value >= 1.0 ? 1 : 0;
        Observation obs = make_observation(signal, response.answer, response.feedback);
        traj.steps.push_back({std::move(g), obs});
        if (signal == 1) {
            traj.terminated_positive = true;
            break;
        }
        context = revision_context_key(traj.context, env.feedback_bucket(*obs.feedback));
    }
    return traj;
}

// K independent rollouts per task. Each (task, k) repetition draws from its
// own derived stream, so results are identical no matter how the work is
// scheduled; with workers > 1 tasks are fanned out across threads and merged
// back in task order.
template <class P>
std::vector<Trajectory> collect(const P& policy, const Environment& env,
                                const std::vector<Task>& tasks, int repetitions, int max_turns,
                                double temperature, const RandomSource& rng, int iteration = 0,
                                int workers = 1);

std::vector<Trajectory> collect(const PolicyTable& policy, const Environment& env,
                                const std::vector<Task>& tasks, int repetitions, int max_turns,
                                double temperature, const RandomSource& rng, int iteration = 0,
                                int workers = 1);
std::vector<Trajectory> collect(const TokenPolicy& policy, const Environment& env,
                                const std::vector<Task>& tasks, int repetitions, int max_turns,
                                double temperature, const RandomSource& rng, int iteration = 0,
                                int workers = 1);

// Splits every observed action into per-task positive/negative pools.
SignalPools extract_signals(const std::vector<Trajectory>& trajectories);

// Set union with the previous round's pools; increments the iteration index.
// A guidance newly observed positive is dropped from the old negatives.
GuidanceDataset bootstrap(const GuidanceDataset& previous, const SignalPools& fresh);

struct ExpertFallback {
    const Environment* env = nullptr;
    const std::vector<Task>* tasks = nullptr;
};

// Up to max_pairs_per_task pairs per task, drawn uniformly without
// replacement from the positive x negative cross product. Tasks without
// negatives yield nothing; tasks without positives fall back to the expert
// guidance when a fallback environment is supplied.
std::vector<PreferencePair> curate_pairs(const GuidanceDataset& dataset, int max_pairs_per_task,
                                         const ExpertFallback& fallback, RandomSource& rng);

}  // namespace gforge
