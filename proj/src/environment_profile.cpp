#include <algorithm>
#include <cstdio>
#include <map>

#include "gforge/environment.hpp"

namespace gforge {

ProfileEnv::ProfileEnv(ProfileConfig config) : config_(std::move(config)) {
    if (config_.labels.size() < 2) throw ConfigError("profile env needs at least 2 labels");
    if (config_.profile_min < 1 || config_.profile_max < config_.profile_min)
        throw ConfigError("invalid profile length range");
    vocab_ = Vocabulary(config_.labels);
}

namespace {

// counts per label, and labels ranked by (count desc, name asc)
std::vector<std::pair<std::string, int>> ranked_labels(const Task& task) {
    std::map<std::string, int> counts;
    for (const auto& [item, label] : task.profile) ++counts[label];
    std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

}  // namespace

std::string ProfileEnv::majority_label(const Task& task) const {
    if (task.profile.empty()) throw EnvError("profile task has no history");
    return ranked_labels(task).front().first;
}

std::string ProfileEnv::context_key(const Task& task) const {
    auto ranked = ranked_labels(task);
    std::string key = "profile:" + ranked[0].first;
    if (ranked.size() > 1) key += ">" + ranked[1].first;
    return key;
}

int ProfileEnv::feedback_bucket(const std::string& feedback) const {
    if (feedback.find("absent") != std::string::npos) return 1;
    if (feedback.find("not the dominant") != std::string::npos) return 2;
    return 0;
}

GeneratorResponse ProfileEnv::step(const Task& task, const Guidance& guidance) const {
    if (task.kind != TaskKind::Personalization)
        throw EnvError("profile environment expects personalization tasks");
    if (guidance.tokens.empty()) throw VocabError("empty guidance");
    // the generator trusts the summary: it predicts the first label named
    const std::string& answer = vocab_.word(guidance.tokens.front());
    if (task.ground_truth && answer == *task.ground_truth)
        return make_response(answer, 1.0, std::nullopt);
    int present = 0;
    for (const auto& [item, label] : task.profile)
        if (label == answer) ++present;
    if (present == 0)
        return make_response(answer, 0.0, "label " + answer + " absent from profile");
    return make_response(answer, 0.0, "label " + answer + " not the dominant label");
}

std::vector<Guidance> ProfileEnv::admissible_guidances(const Task&) const {
    std::vector<Guidance> out;
    const int n = vocab_.size();
    for (int i = 0; i < n; ++i) out.push_back(make_guidance({i}, vocab_));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) out.push_back(make_guidance({i, j}, vocab_));
    return out;
}

Guidance ProfileEnv::expert_guidance(const Task& task) const {
    auto id = vocab_.id(majority_label(task));
    if (!id) throw EnvError("majority label missing from label set");
    return make_guidance({*id}, vocab_);
}

std::vector<Task> ProfileEnv::generate_tasks(int n, RandomSource& rng) const {
    if (n < 1) throw EnvError("generate_tasks requires n >= 1");
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%08llx",
                  static_cast<unsigned long long>(rng.next_u64() & 0xffffffffull));
    std::vector<Task> tasks;
    for (int i = 0; i < n; ++i) {
        Task task;
        task.id = "profile-" + std::string(prefix) + "-" + std::to_string(i);
        task.kind = TaskKind::Personalization;
        const int len =
            config_.profile_min + static_cast<int>(rng.next_below(static_cast<uint64_t>(
                                      config_.profile_max - config_.profile_min + 1)));
        for (int j = 0; j < len; ++j) {
            const std::string& label = config_.labels[rng.next_below(config_.labels.size())];
            task.profile.emplace_back("item-" + std::to_string(j), label);
        }
        task.prompt = "predict the preferred label for the next item of user " + task.id;
        task.ground_truth = majority_label(task);
        validate_task(task);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

}  // namespace gforge
