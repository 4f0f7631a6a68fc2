#pragma once
// Shared domain types: tasks, guidance token sequences, observations and
// trajectories, plus the error taxonomy used across modules.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gforge {

// ----------------------------- errors -----------------------------

struct VocabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContextError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EnvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RemoteError : std::runtime_error {
    bool retryable;
    RemoteError(const std::string& msg, bool retryable_)
        : std::runtime_error(msg), retryable(retryable_) {}
};
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SupportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    int epoch;
    DivergenceError(const std::string& msg, int epoch_)
        : std::runtime_error(msg), epoch(epoch_) {}
};
struct NoPairsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LabelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CompatibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ----------------------------- vocabulary -----------------------------

// Finite, closed guidance vocabulary. Token ids index into the word list;
// rendering joins words with single spaces and tokenizing splits on
// whitespace, so the two are exact inverses for vocab-valid text.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> words);

    int size() const { return static_cast<int>(words_.size()); }
    const std::string& word(int id) const;
    std::optional<int> id(const std::string& word) const;
    const std::vector<std::string>& words() const { return words_; }

    bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

std::string render_guidance(const std::vector<int>& tokens, const Vocabulary& vocab);
std::vector<int> tokenize_guidance(const std::string& text, const Vocabulary& vocab);

// ----------------------------- domain types -----------------------------

enum class TaskKind { Reasoning, Planning, Personalization };

const char* task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(std::string_view name);

struct Task {
    std::string id;
    std::string prompt;
    std::optional<std::string> ground_truth;
    TaskKind kind = TaskKind::Reasoning;
    // (item text, label text) history; required for Personalization.
    std::vector<std::pair<std::string, std::string>> profile;
};

// Throws EnvError if the per-task invariants do not hold.
void validate_task(const Task& task);

struct Guidance {
    std::vector<int> tokens;
    std::string text;
    int iteration = 0;     // training round the guidance was sampled in
    int turn = 1;          // 1-based attempt index within a trajectory
    int sample_index = 1;  // 1-based repetition index within collection

    bool same_tokens(const Guidance& other) const { return tokens == other.tokens; }
};

Guidance make_guidance(std::vector<int> tokens, const Vocabulary& vocab,
                       int iteration = 0, int turn = 1, int sample_index = 1);

struct Observation {
    int signal = 0;  // 1 when the generator's final answer passed evaluation
    std::string answer;
    std::optional<std::string> feedback;  // present exactly when signal == 0
};

Observation make_observation(int signal, std::string answer,
                             std::optional<std::string> feedback);

struct UtilityValue {
    double value = 0.0;
};

UtilityValue make_utility(double value);  // enforces [0, 1]

struct TrajectoryStep {
    Guidance action;
    Observation observation;
};

struct Trajectory {
    std::string task_id;
    std::string context;  // base policy context key the rollout started from
    std::string prompt;
    std::vector<TrajectoryStep> steps;
    bool terminated_positive = false;
};

// Throws EnvError if step ordering / termination invariants are violated.
void validate_trajectory(const Trajectory& t, int max_turns);

}  // namespace gforge
