#include <algorithm>
#include <cstdio>
#include <memory>

#include "gforge/environment.hpp"

namespace gforge {

GeneratorResponse make_response(std::string answer, double utility,
                                std::optional<std::string> feedback) {
    UtilityValue u = make_utility(utility);
    if (u.value >= 1.0 && feedback) throw EnvError("successful response must not carry feedback");
    if (u.value <= 0.0 && (!feedback || feedback->empty()))
        throw EnvError("failed response requires nonempty feedback");
    return GeneratorResponse{std::move(answer), u, std::move(feedback)};
}

std::string revision_context_key(const std::string& base, int feedback_bucket) {
    return base + "|fb" + std::to_string(feedback_bucket);
}

// ----------------------------- expression parsing -----------------------------

namespace {

struct Node {
    bool leaf = false;
    long long value = 0;
    char op = 0;
    std::unique_ptr<Node> left, right;
};

std::unique_ptr<Node> parse_expr(const std::string& s, size_t& pos) {
    if (pos >= s.size()) throw EnvError("unexpected end of expression");
    if (s[pos] == '(') {
        ++pos;
        auto node = std::make_unique<Node>();
        node->left = parse_expr(s, pos);
        if (pos >= s.size() || (s[pos] != '+' && s[pos] != '-' && s[pos] != '*'))
            throw EnvError("expected operator in expression");
        node->op = s[pos++];
        node->right = parse_expr(s, pos);
        if (pos >= s.size() || s[pos] != ')') throw EnvError("expected ')' in expression");
        ++pos;
        return node;
    }
    size_t start = pos;
    if (pos < s.size() && s[pos] == '-') ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) throw EnvError("expected number in expression");
    auto node = std::make_unique<Node>();
    node->leaf = true;
    node->value = std::stoll(s.substr(start, pos - start));
    return node;
}

long long apply_op(char op, long long a, long long b) {
    switch (op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
    }
    throw EnvError("unknown operator");
}

long long eval_tree(const Node& n) {
    if (n.leaf) return n.value;
    return apply_op(n.op, eval_tree(*n.left), eval_tree(*n.right));
}

const char* op_word(char op) {
    switch (op) {
        case '+': return "add";
        case '-': return "sub";
        case '*': return "mul";
    }
    return "?";
}

}  // namespace

std::string ChainArithEnv::Step::text() const {
    std::string out = op_word(op);
    out += ' ';
    out += lhs ? std::to_string(*lhs) : "_";
    out += ' ';
    out += rhs ? std::to_string(*rhs) : "_";
    return out;
}

ChainArithEnv::ChainArithEnv(ChainArithConfig config) : config_(config) {
    if (config_.ops_min < 1 || config_.ops_max < config_.ops_min ||
        config_.ops_max > config_.max_steps)
        throw ConfigError("invalid chain-arith op counts");
    if (config_.operand_min > config_.operand_max || config_.operand_min < 0)
        throw ConfigError("invalid chain-arith operand range");
    if (config_.side_pattern != "tail" && config_.side_pattern != "free")
        throw ConfigError("chain-arith side_pattern must be 'tail' or 'free'");
    std::vector<std::string> words;
    for (int i = 0; i < config_.max_steps; ++i) words.push_back("step" + std::to_string(i));
    vocab_ = Vocabulary(std::move(words));
}

ChainArithEnv::Parsed ChainArithEnv::parse_prompt(const std::string& prompt) const {
    size_t pos = 0;
    std::unique_ptr<Node> root = parse_expr(prompt, pos);
    if (pos != prompt.size()) throw EnvError("trailing characters in expression");
    if (root->leaf) throw EnvError("expression has no operations");

    // appearance order = in-order visit of internal nodes
    std::vector<const Node*> appearance;
    auto in_order = [&](auto&& self, const Node& n) -> void {
        if (n.leaf) return;
        self(self, *n.left);
        appearance.push_back(&n);
        self(self, *n.right);
    };
    in_order(in_order, *root);

    // chain check + execution depth (innermost node executes first)
    std::map<const Node*, int> exec;
    auto assign_exec = [&](auto&& self, const Node& n) -> int {
        const bool left_internal = !n.left->leaf;
        const bool right_internal = !n.right->leaf;
        if (left_internal && right_internal) throw EnvError("expression is not a chain");
        int depth = 0;
        if (left_internal) depth = self(self, *n.left) + 1;
        if (right_internal) depth = self(self, *n.right) + 1;
        exec[&n] = depth;
        return depth;
    };
    assign_exec(assign_exec, *root);

    Parsed parsed;
    parsed.value = eval_tree(*root);
    for (const Node* n : appearance) {
        Step s;
        s.op = n->op;
        s.lhs = n->left->leaf ? std::optional<long long>(n->left->value) : std::nullopt;
        s.rhs = n->right->leaf ? std::optional<long long>(n->right->value) : std::nullopt;
        s.exec_order = exec[n];
        parsed.steps.push_back(s);
    }
    // shape signature: which side the running value enters on, bottom-up
    std::vector<const Node*> by_exec(appearance.begin(), appearance.end());
    std::sort(by_exec.begin(), by_exec.end(),
              [&](const Node* a, const Node* b) { return exec[a] < exec[b]; });
    for (size_t i = 1; i < by_exec.size(); ++i)
        parsed.shape += by_exec[i]->left->leaf ? 'R' : 'L';
    return parsed;
}

std::string ChainArithEnv::context_key(const Task& task) const {
    Parsed p = parse_prompt(task.prompt);
    return "arith:n" + std::to_string(p.steps.size()) + ":" + p.shape;
}

int ChainArithEnv::feedback_bucket(const std::string& feedback) const {
    int idx = -1;
    if (std::sscanf(feedback.c_str(), "step %d failed", &idx) == 1 && idx >= 0)
        return 1 + std::min(idx, config_.max_steps);
    return 0;
}

GeneratorResponse ChainArithEnv::step(const Task& task, const Guidance& guidance) const {
    if (task.kind != TaskKind::Reasoning)
        throw EnvError("chain-arith environment expects reasoning tasks");
    Parsed parsed = parse_prompt(task.prompt);
    const int n = static_cast<int>(parsed.steps.size());

    auto fail = [&](const std::string& answer, int step_idx, const std::string& reason) {
        return make_response(answer, 0.0,
                             "step " + std::to_string(step_idx) + " failed: " + reason);
    };

    std::vector<bool> executed(static_cast<size_t>(n), false);
    std::optional<long long> acc;
    std::vector<int> exec_sequence;  // exec_order of each executed step, in order
    for (int tok : guidance.tokens) {
        if (tok < 0 || tok >= vocab_.size()) throw VocabError("guidance token out of range");
        if (tok >= n) return fail("", tok, "no such step");
        if (executed[static_cast<size_t>(tok)]) return fail("", tok, "already executed");
        const Step& s = parsed.steps[static_cast<size_t>(tok)];
        if ((!s.lhs || !s.rhs) && !acc) return fail("", tok, "missing operand");
        long long a = s.lhs ? *s.lhs : *acc;
        long long b = s.rhs ? *s.rhs : *acc;
        acc = apply_op(s.op, a, b);
        executed[static_cast<size_t>(tok)] = true;
        exec_sequence.push_back(s.exec_order);
    }
    for (int i = 0; i < n; ++i)
        if (!executed[static_cast<size_t>(i)]) return fail("", i, "not executed");

    std::string answer = std::to_string(*acc);
    if (task.ground_truth && answer == *task.ground_truth)
        return make_response(answer, 1.0, std::nullopt);
    // all steps ran but the result is off: report the first step executed out
    // of chain order
    for (size_t pos = 0; pos < exec_sequence.size(); ++pos) {
        if (exec_sequence[pos] != static_cast<int>(pos)) {
            int appearance_idx = guidance.tokens[pos];
            return fail(answer, appearance_idx, "out of order");
        }
    }
    return fail(answer, 0, "wrong result");
}

std::vector<Guidance> ChainArithEnv::admissible_guidances(const Task& task) const {
    Parsed parsed = parse_prompt(task.prompt);
    const int n = static_cast<int>(parsed.steps.size());
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    std::vector<Guidance> out;
    do {
        out.push_back(make_guidance(perm, vocab_));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

Guidance ChainArithEnv::expert_guidance(const Task& task) const {
    Parsed parsed = parse_prompt(task.prompt);
    const int n = static_cast<int>(parsed.steps.size());
    std::vector<int> tokens(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        tokens[static_cast<size_t>(parsed.steps[static_cast<size_t>(i)].exec_order)] = i;
    return make_guidance(tokens, vocab_);
}

std::vector<Task> ChainArithEnv::generate_tasks(int n, RandomSource& rng) const {
    if (n < 1) throw EnvError("generate_tasks requires n >= 1");
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%08llx",
                  static_cast<unsigned long long>(rng.next_u64() & 0xffffffffull));
    std::vector<Task> tasks;
    tasks.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int ops =
            config_.ops_min + static_cast<int>(rng.next_below(
                                  static_cast<uint64_t>(config_.ops_max - config_.ops_min + 1)));
        auto draw_operand = [&] {
            return static_cast<long long>(
                config_.operand_min +
                static_cast<long long>(rng.next_below(
                    static_cast<uint64_t>(config_.operand_max - config_.operand_min + 1))));
        };
        const char op_chars[3] = {'+', '-', '*'};
        // "tail" chains stay left-entering except that full-budget chains flip
        // the final link, which rotates the correct step order by one
        const bool rotate_last = config_.side_pattern == "tail" && ops == config_.max_steps;
        long long acc = draw_operand();
        std::string text = std::to_string(acc);
        for (int j = 0; j < ops; ++j) {
            char op = op_chars[rng.next_below(3)];
            long long x = draw_operand();
            // the first link has two literals; later links pick the side the
            // running value enters on
            bool acc_left;
            if (j == 0) acc_left = true;
            else if (config_.side_pattern == "tail") acc_left = !(rotate_last && j == ops - 1);
            else acc_left = rng.next_below(2) == 0;
            if (acc_left) {
                text = "(" + text + op + std::to_string(x) + ")";
                acc = apply_op(op, acc, x);
            } else {
                text = "(" + std::to_string(x) + op + text + ")";
                acc = apply_op(op, x, acc);
            }
        }
        Task task;
        task.id = "arith-" + std::string(prefix) + "-" + std::to_string(i);
        task.prompt = text;
        task.ground_truth = std::to_string(acc);
        task.kind = TaskKind::Reasoning;
        validate_task(task);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

// ----------------------------- policy builders -----------------------------

PolicyTable make_tabular_policy(const Environment& env, const std::vector<Task>& tasks,
                                bool include_feedback_contexts) {
    std::map<std::string, const Task*> by_key;
    for (const auto& task : tasks) by_key.emplace(env.context_key(task), &task);
    std::vector<PolicyTable::Context> contexts;
    for (const auto& [key, task] : by_key) {
        std::vector<std::vector<int>> guidances;
        for (const auto& g : env.admissible_guidances(*task)) guidances.push_back(g.tokens);
        PolicyTable::Context base{key, guidances, {}};
        contexts.push_back(base);
        if (include_feedback_contexts) {
            for (int b = 0; b < env.feedback_bucket_count(); ++b)
                contexts.push_back({revision_context_key(key, b), guidances, {}});
        }
    }
    return PolicyTable(env.guidance_vocab(), std::move(contexts));
}

TokenPolicy make_token_policy(const Environment& env, int context_buckets, int max_len) {
    if (max_len <= 0) max_len = env.max_guidance_len();
    return TokenPolicy(env.guidance_vocab(), context_buckets, max_len);
}

}  // namespace gforge
