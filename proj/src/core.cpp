#include "gforge/core.hpp"

#include <cmath>
#include <sstream>

namespace gforge {

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (size_t i = 0; i < words_.size(); ++i) {
        if (words_[i].empty()) throw VocabError("empty word in vocabulary");
        if (words_[i].find_first_of(" \t\n") != std::string::npos)
            throw VocabError("vocabulary word contains whitespace: '" + words_[i] + "'");
        auto [_, inserted] = index_.emplace(words_[i], static_cast<int>(i));
        if (!inserted) throw VocabError("duplicate vocabulary word: '" + words_[i] + "'");
    }
}

const std::string& Vocabulary::word(int id) const {
    if (id < 0 || id >= size())
        throw VocabError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                         std::to_string(size()));
    return words_[static_cast<size_t>(id)];
}

std::optional<int> Vocabulary::id(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::string render_guidance(const std::vector<int>& tokens, const Vocabulary& vocab) {
    if (tokens.empty()) throw VocabError("cannot render empty guidance");
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out += ' ';
        out += vocab.word(tokens[i]);
    }
    return out;
}

std::vector<int> tokenize_guidance(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> tokens;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        auto id = vocab.id(word);
        if (!id) throw VocabError("unknown word: '" + word + "'");
        tokens.push_back(*id);
    }
    if (tokens.empty()) throw VocabError("cannot tokenize empty guidance text");
    return tokens;
}

const char* task_kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::Reasoning: return "reasoning";
        case TaskKind::Planning: return "planning";
        case TaskKind::Personalization: return "personalization";
    }
    return "unknown";
}

TaskKind task_kind_from_name(std::string_view name) {
    if (name == "reasoning") return TaskKind::Reasoning;
    if (name == "planning") return TaskKind::Planning;
    if (name == "personalization") return TaskKind::Personalization;
    throw FormatError("unknown task kind: '" + std::string(name) + "'");
}

void validate_task(const Task& task) {
    if (task.id.empty()) throw EnvError("task id must be nonempty");
    if (task.kind == TaskKind::Personalization && task.profile.empty())
        throw EnvError("personalization task '" + task.id + "' requires a nonempty profile");
    if (task.kind == TaskKind::Reasoning && !task.ground_truth)
        throw EnvError("reasoning task '" + task.id + "' requires a ground truth");
}

Guidance make_guidance(std::vector<int> tokens, const Vocabulary& vocab, int iteration,
                       int turn, int sample_index) {
    Guidance g;
    g.text = render_guidance(tokens, vocab);
    g.tokens = std::move(tokens);
    g.iteration = iteration;
    g.turn = turn;
    g.sample_index = sample_index;
    return g;
}

Observation make_observation(int signal, std::string answer,
                             std::optional<std::string> feedback) {
    if (signal != 0 && signal != 1) throw EnvError("observation signal must be 0 or 1");
    if (signal == 1 && feedback) throw EnvError("positive observation must not carry feedback");
    if (signal == 0 && (!feedback || feedback->empty()))
        throw EnvError("negative observation requires nonempty feedback");
    Observation o;
    o.signal = signal;
    o.answer = std::move(answer);
    o.feedback = std::move(feedback);
    return o;
}

UtilityValue make_utility(double value) {
    if (!(value >= 0.0 && value <= 1.0) || !std::isfinite(value))
        throw EnvError("utility value must lie in [0, 1]");
    return UtilityValue{value};
}

void validate_trajectory(const Trajectory& t, int max_turns) {
    if (t.steps.empty()) throw EnvError("trajectory must contain at least one step");
    if (max_turns > 0 && static_cast<int>(t.steps.size()) > max_turns)
        throw EnvError("trajectory exceeds the turn budget");
    for (size_t i = 0; i + 1 < t.steps.size(); ++i) {
        if (t.steps[i].observation.signal == 1)
            throw EnvError("trajectory continues past a positive observation");
    }
    const bool last_positive = t.steps.back().observation.signal == 1;
    if (t.terminated_positive != last_positive)
        throw EnvError("terminated_positive must match the final observation signal");
}

}  // namespace gforge
