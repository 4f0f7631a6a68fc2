#include "gforge/interaction.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace gforge {

size_t GuidanceDataset::positive_count() const {
    size_t n = 0;
    for (const auto& [id, entry] : tasks) n += entry.positives.size();
    return n;
}

size_t GuidanceDataset::negative_count() const {
    size_t n = 0;
    for (const auto& [id, entry] : tasks) n += entry.negatives.size();
    return n;
}

template <class P>
std::vector<Trajectory> collect_impl(const P& policy, const Environment& env,
                                     const std::vector<Task>& tasks, int repetitions,
                                     int max_turns, double temperature, const RandomSource& rng,
                                     int iteration, int workers) {
    if (repetitions < 1) throw EnvError("collect requires K >= 1");
    const size_t total = tasks.size() * static_cast<size_t>(repetitions);
    std::vector<Trajectory> out(total);

    auto run_task = [&](size_t task_idx) {
        const Task& task = tasks[task_idx];
        for (int k = 1; k <= repetitions; ++k) {
            RandomSource stream =
                rng.derive(task.id, static_cast<uint64_t>(k));
            Trajectory traj = rollout(policy, env, task, max_turns, temperature, stream);
            for (auto& step : traj.steps) {
                step.action.sample_index = k;
                step.action.iteration = iteration;
            }
            out[task_idx * static_cast<size_t>(repetitions) + static_cast<size_t>(k - 1)] =
                std::move(traj);
        }
    };

    if (workers <= 1 || tasks.size() <= 1) {
        for (size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        const int n_workers = std::min<int>(workers, static_cast<int>(tasks.size()));
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
                    run_task(i);
            });
        }
        for (auto& t : pool) t.join();
    }
    return out;
}

std::vector<Trajectory> collect(const PolicyTable& policy, const Environment& env,
                                const std::vector<Task>& tasks, int repetitions, int max_turns,
                                double temperature, const RandomSource& rng, int iteration,
                                int workers) {
    return collect_impl(policy, env, tasks, repetitions, max_turns, temperature, rng, iteration,
                        workers);
}

std::vector<Trajectory> collect(const TokenPolicy& policy, const Environment& env,
                                const std::vector<Task>& tasks, int repetitions, int max_turns,
                                double temperature, const RandomSource& rng, int iteration,
                                int workers) {
    return collect_impl(policy, env, tasks, repetitions, max_turns, temperature, rng, iteration,
                        workers);
}

SignalPools extract_signals(const std::vector<Trajectory>& trajectories) {
    SignalPools pools;
    for (const auto& traj : trajectories) {
        auto& entry = pools.tasks[traj.task_id];
        if (entry.context.empty()) {
            entry.context = traj.context;
            entry.prompt = traj.prompt;
        }
        for (const auto& step : traj.steps) {
            if (step.observation.signal == 1)
                entry.positives.emplace(step.action.tokens, step.action);
            else
                entry.negatives.emplace(step.action.tokens, step.action);
        }
    }
    // a guidance seen with both signals resolves positive
    for (auto& [id, entry] : pools.tasks)
        for (const auto& [tokens, g] : entry.positives) entry.negatives.erase(tokens);
    return pools;
}

GuidanceDataset bootstrap(const GuidanceDataset& previous, const SignalPools& fresh) {
    GuidanceDataset out;
    out.iteration = previous.iteration + 1;
    out.tasks = previous.tasks;
    for (const auto& [id, entry] : fresh.tasks) {
        auto& dst = out.tasks[id];
        if (dst.context.empty()) {
            dst.context = entry.context;
            dst.prompt = entry.prompt;
        }
        for (const auto& [tokens, g] : entry.positives) dst.positives.emplace(tokens, g);
        for (const auto& [tokens, g] : entry.negatives) dst.negatives.emplace(tokens, g);
    }
    // latest signal wins: anything now positive cannot stay negative
    for (auto& [id, entry] : out.tasks)
        for (const auto& [tokens, g] : entry.positives) entry.negatives.erase(tokens);
    return out;
}

std::vector<PreferencePair> curate_pairs(const GuidanceDataset& dataset, int max_pairs_per_task,
                                         const ExpertFallback& fallback, RandomSource& rng) {
    if (max_pairs_per_task < 1) throw EnvError("curate_pairs requires max_pairs_per_task >= 1");

    std::map<std::string, const Task*> task_lookup;
    if (fallback.tasks)
        for (const auto& task : *fallback.tasks) task_lookup.emplace(task.id, &task);

    std::vector<PreferencePair> pairs;
    for (const auto& [task_id, entry] : dataset.tasks) {
        if (entry.negatives.empty()) continue;  // nothing to contrast against

        std::vector<const Guidance*> positives;
        for (const auto& [tokens, g] : entry.positives) positives.push_back(&g);
        Guidance expert;
        if (positives.empty()) {
            if (!fallback.env) continue;
            auto it = task_lookup.find(task_id);
            if (it == task_lookup.end()) continue;
            expert = fallback.env->expert_guidance(*it->second);
            positives.push_back(&expert);
        }
        std::vector<const Guidance*> negatives;
        for (const auto& [tokens, g] : entry.negatives) negatives.push_back(&g);

        const size_t combos = positives.size() * negatives.size();
        RandomSource stream = rng.derive(task_id);
        for (size_t flat : stream.sample_indices(combos, static_cast<size_t>(max_pairs_per_task))) {
            const Guidance& pos = *positives[flat / negatives.size()];
            const Guidance& neg = *negatives[flat % negatives.size()];
            if (pos.tokens == neg.tokens) continue;  // cannot happen for a deterministic oracle
            pairs.push_back(PreferencePair{task_id, entry.context, entry.prompt, pos, neg});
        }
    }
    return pairs;
}

}  // namespace gforge
