#include "gforge/inference.hpp"

#include <algorithm>
#include <cmath>

namespace gforge {

void InferenceConfig::validate() const {
    if (closed_loop_turns < 1) throw ConfigError("closed_loop_turns must be >= 1");
    if (max_reflections < 0) throw ConfigError("max_reflections must be >= 0");
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
}

int InferenceConfig::attempt_budget() const {
    return std::min(closed_loop_turns, max_reflections + 1);
}

namespace {

bool parse_int(const std::string& s, long long& out) {
    if (s.empty()) return false;
    size_t pos = 0;
    try {
        out = std::stoll(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size();
}

template <class P>
MetricReport evaluate_impl(const P& policy, const Environment& env,
                           const std::vector<Task>& tasks, const InferenceConfig& config) {
    if (tasks.empty()) throw EnvError("evaluate requires at least one task");

    struct KindBucket {
        std::vector<bool> successes;
        std::vector<std::string> predictions;
        std::vector<std::string> references;
    };
    std::map<std::string, KindBucket> buckets;
    std::vector<bool> all_successes;

    for (const auto& task : tasks) {
        auto [response, traj] = closed_loop_infer(policy, env, task, config);
        KindBucket& bucket = buckets[task_kind_name(task.kind)];
        const bool success = traj.terminated_positive;
        bucket.successes.push_back(success);
        all_successes.push_back(success);
        if (task.ground_truth) {
            bucket.predictions.push_back(response.answer);
            bucket.references.push_back(*task.ground_truth);
        }
    }

    const std::vector<std::string> labels = env.answer_labels();
    MetricReport report;
    report.sample_count = tasks.size();
    report.overall["success_rate"] = success_rate(all_successes);

    for (auto& [kind, bucket] : buckets) {
        auto& row = report.per_kind[kind];
        report.kind_counts[kind] = bucket.successes.size();
        row["success_rate"] = success_rate(bucket.successes);
        if (!bucket.predictions.empty()) {
            row["accuracy"] = accuracy(bucket.predictions, bucket.references);
            if (!labels.empty() && kind == task_kind_name(TaskKind::Personalization)) {
                bool in_set = true;
                for (const auto& p : bucket.predictions)
                    in_set = in_set && std::find(labels.begin(), labels.end(), p) != labels.end();
                if (in_set) row["macro_f1"] = macro_f1(bucket.predictions, bucket.references, labels);
            }
            std::vector<long long> pred_scores, ref_scores;
            bool numeric = true;
            for (size_t i = 0; i < bucket.predictions.size() && numeric; ++i) {
                long long a, b;
                numeric = parse_int(bucket.predictions[i], a) && parse_int(bucket.references[i], b);
                if (numeric) {
                    pred_scores.push_back(a);
                    ref_scores.push_back(b);
                }
            }
            if (numeric && kind == task_kind_name(TaskKind::Personalization)) {
                auto [mae, rmse] = mae_rmse(pred_scores, ref_scores);
                row["mae"] = mae;
                row["rmse"] = rmse;
            }
        }
    }

    // overall accuracy over every task that has a ground truth
    std::vector<std::string> predictions, references;
    for (const auto& [kind, bucket] : buckets) {
        predictions.insert(predictions.end(), bucket.predictions.begin(), bucket.predictions.end());
        references.insert(references.end(), bucket.references.begin(), bucket.references.end());
    }
    if (!predictions.empty()) report.overall["accuracy"] = accuracy(predictions, references);
    return report;
}

}  // namespace

MetricReport evaluate(const PolicyTable& policy, const Environment& env,
                      const std::vector<Task>& tasks, const InferenceConfig& config) {
    return evaluate_impl(policy, env, tasks, config);
}

MetricReport evaluate(const TokenPolicy& policy, const Environment& env,
                      const std::vector<Task>& tasks, const InferenceConfig& config) {
    return evaluate_impl(policy, env, tasks, config);
}

}  // namespace gforge
