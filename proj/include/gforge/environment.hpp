#pragma once
// The black-box generator plus its evaluation oracle, behind one interface.
// Three scripted environments cover the guidance families — ordered task
// decomposition (ChainArithEnv), high-level planning over a small household
// world (GridPlanEnv), and history summarization (ProfileEnv) — and a remote
// chat-completion client plugs a hosted model behind the same contract
// (see remote.hpp).

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gforge/core.hpp"
#include "gforge/policy.hpp"
#include "gforge/rng.hpp"

namespace gforge {

struct GeneratorResponse {
    std::string answer;
    UtilityValue utility;
    std::optional<std::string> feedback;  // nonempty when utility is 0
};

GeneratorResponse make_response(std::string answer, double utility,
                                std::optional<std::string> feedback);

class Environment {
public:
    virtual ~Environment() = default;

    virtual TaskKind kind() const = 0;
    virtual const Vocabulary& guidance_vocab() const = 0;
    virtual int max_guidance_len() const = 0;

    // policy context key derived from the task ("bucketing" of the prompt)
    virtual std::string context_key(const Task& task) const = 0;

    // maps failure feedback onto a small integer so revision turns can
    // condition on it; 0 is the generic bucket
    virtual int feedback_bucket(const std::string& /*feedback*/) const { return 0; }
    virtual int feedback_bucket_count() const { return 1; }

    // one controller -> generator -> eval round; pure in (task, guidance)
    // for scripted environments
    virtual GeneratorResponse step(const Task& task, const Guidance& guidance) const = 0;

    // complete finite action set for the task's context (scripted only)
    virtual std::vector<Guidance> admissible_guidances(const Task& /*task*/) const {
        throw UnsupportedError("admissible_guidances is not supported by this environment");
    }

    // strongest available guidance (scripted only); utility 1 by construction
    virtual Guidance expert_guidance(const Task& /*task*/) const {
        throw UnsupportedError("expert_guidance is not supported by this environment");
    }

    virtual std::vector<Task> generate_tasks(int /*n*/, RandomSource& /*rng*/) const {
        throw UnsupportedError("generate_tasks is not supported by this environment");
    }

    // label set answers are drawn from, when the task family has one
    virtual std::vector<std::string> answer_labels() const { return {}; }
};

// context key for a revision turn, conditioned on the failure bucket
std::string revision_context_key(const std::string& base, int feedback_bucket);

// ----------------------------- chain arithmetic -----------------------------

// Reasoning family. A task is a fully parenthesized arithmetic chain such as
// "((3+4)*2)"; its operator steps are listed in order of appearance in the
// text, and guidance is an ordering of step references (tokens step0..stepN).
// The generator executes the referenced steps literally, carrying a single
// running value for the "_" placeholder, and the answer is checked against
// the ground truth.
struct ChainArithConfig {
    int ops_min = 2;
    int ops_max = 3;
    int operand_min = 2;
    int operand_max = 9;
    int max_steps = 4;  // fixes the vocabulary (step0..step{max_steps-1})
    // Generated chain styles. "tail" keeps the running value on the left
    // except possibly the final link, so correct step orders are the listed
    // order or its rotation by one; "free" draws every side at random.
    std::string side_pattern = "tail";
};

class ChainArithEnv : public Environment {
public:
    explicit ChainArithEnv(ChainArithConfig config = {});

    TaskKind kind() const override { return TaskKind::Reasoning; }
    const Vocabulary& guidance_vocab() const override { return vocab_; }
    int max_guidance_len() const override { return config_.max_steps; }
    std::string context_key(const Task& task) const override;
    int feedback_bucket(const std::string& feedback) const override;
    int feedback_bucket_count() const override { return config_.max_steps + 2; }
    GeneratorResponse step(const Task& task, const Guidance& guidance) const override;
    std::vector<Guidance> admissible_guidances(const Task& task) const override;
    Guidance expert_guidance(const Task& task) const override;
    std::vector<Task> generate_tasks(int n, RandomSource& rng) const override;

    const ChainArithConfig& config() const { return config_; }

    // one listed sub-step: op applied to two operands, either of which may be
    // the running value ("_")
    struct Step {
        char op;                      // '+', '-', '*'
        std::optional<long long> lhs; // nullopt = running value
        std::optional<long long> rhs;
        int exec_order;               // position in the correct execution chain
        std::string text() const;    // e.g. "add 3 4", "mul _ 2"
    };
    struct Parsed {
        std::vector<Step> steps;  // in order of appearance in the prompt
        long long value;          // evaluated result
        std::string shape;        // chain shape signature, e.g. "LR"
    };
    Parsed parse_prompt(const std::string& prompt) const;

private:
    ChainArithConfig config_;
    Vocabulary vocab_;
};

// ----------------------------- grid planning -----------------------------

// Planning family. A linear arrangement of receptacles with a target object;
// guidance is a subgoal sequence over a closed template set and a scripted
// executor expands each subgoal into primitive actions with a fixed search
// order. An episode fails once the primitive-action budget is exhausted.
struct GridPlanConfig {
    int max_actions = 50;
    int receptacles = 10;  // includes the four appliance slots
    uint64_t world_seed = 0;
};

enum class GridTaskType { Pick, Clean, Heat, Cool, Examine, PickTwo };
const char* grid_task_type_name(GridTaskType t);

class GridPlanEnv : public Environment {
public:
    explicit GridPlanEnv(GridPlanConfig config = {});

    TaskKind kind() const override { return TaskKind::Planning; }
    const Vocabulary& guidance_vocab() const override { return vocab_; }
    int max_guidance_len() const override { return 4; }
    std::string context_key(const Task& task) const override;
    int feedback_bucket(const std::string& feedback) const override;
    int feedback_bucket_count() const override { return 8; }
    GeneratorResponse step(const Task& task, const Guidance& guidance) const override;
    std::vector<Guidance> admissible_guidances(const Task& task) const override;
    Guidance expert_guidance(const Task& task) const override;
    std::vector<Task> generate_tasks(int n, RandomSource& rng) const override;

    const GridPlanConfig& config() const { return config_; }

    // hidden world layout, re-derived deterministically from the task id
    struct World {
        GridTaskType type;
        std::string object;               // target object type
        int target_recep;                 // goal receptacle index
        std::vector<int> object_slots;    // receptacle index per instance
        int sink, microwave, fridge, desk;
        std::vector<std::string> recep_names;
    };
    World derive_world(const Task& task) const;

    // required subgoal tokens for a task type, in canonical (expert) order
    std::vector<std::string> required_subgoals(GridTaskType t) const;

private:
    GridPlanConfig config_;
    Vocabulary vocab_;
};

// ----------------------------- profile summarization -----------------------------

// Personalization family. A task carries a user history of (item, label)
// pairs; guidance is a one- or two-label popularity summary and the scripted
// generator predicts the first label named. Ground truth is the history's
// majority label (ties broken toward the lexicographically smallest).
struct ProfileConfig {
    std::vector<std::string> labels = {"action", "comedy", "drama", "scifi"};
    int profile_min = 5;
    int profile_max = 9;
};

class ProfileEnv : public Environment {
public:
    explicit ProfileEnv(ProfileConfig config = {});

    TaskKind kind() const override { return TaskKind::Personalization; }
    const Vocabulary& guidance_vocab() const override { return vocab_; }
    int max_guidance_len() const override { return 2; }
    std::string context_key(const Task& task) const override;
    int feedback_bucket(const std::string& feedback) const override;
    int feedback_bucket_count() const override { return 3; }
    GeneratorResponse step(const Task& task, const Guidance& guidance) const override;
    std::vector<Guidance> admissible_guidances(const Task& task) const override;
    Guidance expert_guidance(const Task& task) const override;
    std::vector<Task> generate_tasks(int n, RandomSource& rng) const override;
    std::vector<std::string> answer_labels() const override { return config_.labels; }

    const ProfileConfig& config() const { return config_; }
    std::string majority_label(const Task& task) const;

private:
    ProfileConfig config_;
    Vocabulary vocab_;
};

// ----------------------------- helpers -----------------------------

// Exact tabular policy over the base contexts of `tasks` (plus, optionally,
// their feedback-extended revision contexts), uniform over the admissible
// guidance set of each context.
PolicyTable make_tabular_policy(const Environment& env, const std::vector<Task>& tasks,
                                bool include_feedback_contexts = false);

// Fresh zero-initialized token policy sized for an environment's vocabulary.
TokenPolicy make_token_policy(const Environment& env, int context_buckets, int max_len = 0);

}  // namespace gforge
