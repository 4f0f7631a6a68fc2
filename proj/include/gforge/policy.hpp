#pragma once
// The controller policy in two interchangeable representations:
//  - PolicyTable: an exact tabular distribution over full guidance sequences
//    per context key, parameterized in logit space so gradient steps are
//    unconstrained and normalization happens on read.
//  - TokenPolicy: a context-conditioned bigram sequence model over a small
//    token alphabet whose last index is a reserved end-of-sequence marker.
//
// Both expose log_prob / sample / log_prob_grad / clone_frozen with identical
// shapes so the training loop is generic over the representation.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gforge/core.hpp"
#include "gforge/rng.hpp"

namespace gforge {

// ----------------------------- numeric helpers -----------------------------

double log_sum_exp(const std::vector<double>& v);
std::vector<double> softmax(const std::vector<double>& logits, double temperature = 1.0);
// argmax with ties broken toward the lowest index
size_t argmax_lowest(const std::vector<double>& v);
// draw an index from an (already normalized) probability vector
size_t categorical_draw(const std::vector<double>& probs, RandomSource& rng);

// ----------------------------- tabular policy -----------------------------

struct TableGradient {
    // one slot per context, aligned with PolicyTable::contexts
    std::vector<std::vector<double>> per_context;

    void add_scaled(const TableGradient& other, double alpha);
    void scale(double alpha);
};

class PolicyTable {
public:
    struct Context {
        std::string key;
        std::vector<std::vector<int>> guidances;  // admissible token sequences
        std::vector<double> logits;               // unnormalized log-weights
    };

    using Gradient = TableGradient;

    PolicyTable() = default;
    PolicyTable(Vocabulary vocab, std::vector<Context> contexts);

    const Vocabulary& vocab() const { return vocab_; }
    const std::vector<Context>& contexts() const { return contexts_; }
    size_t context_index(const std::string& key) const;  // ContextError if unknown
    bool has_context(const std::string& key) const { return index_.count(key) > 0; }

    // normalized probabilities for one context (softmax of its logits)
    std::vector<double> probs(const std::string& key) const;
    std::vector<double> probs_at(size_t context_idx) const;

    double log_prob(const std::string& context, const std::vector<int>& tokens) const;
    Guidance sample(const std::string& context, double temperature, RandomSource& rng) const;
    TableGradient log_prob_grad(const std::string& context, const std::vector<int>& tokens) const;

    TableGradient zeros_like() const;
    void apply_step(const TableGradient& grad, double scale);

    // flat view over every trainable parameter, fixed order
    std::vector<double*> param_ptrs();
    std::vector<double> flatten_gradient(const TableGradient& grad) const;

    size_t find_guidance(size_t context_idx, const std::vector<int>& tokens) const;

private:
    Vocabulary vocab_;
    std::vector<Context> contexts_;
    std::map<std::string, size_t> index_;
};

// Deep, immutable-by-convention snapshot (used as the DPO reference).
inline PolicyTable clone_frozen(const PolicyTable& p) { return p; }

// ----------------------------- token policy -----------------------------

struct TokenGradient {
    std::vector<double> start;                 // V
    std::vector<std::vector<double>> bigram;   // V x V, row = previous token
    std::vector<std::vector<double>> context;  // C x V

    void add_scaled(const TokenGradient& other, double alpha);
    void scale(double alpha);
};

// Sequence model: the first token is scored by start_logits + context row,
// every later token by bigram_logits[prev] + context row, always as a softmax
// over the full alphabet. The last alphabet index is the end marker: guidance
// tokens never contain it, and log_prob charges one end factor whenever the
// sequence is shorter than max_len (termination at max_len is forced, so no
// factor is charged there). Summing exp(log_prob) over all token sequences of
// length 0..max_len therefore yields exactly 1.
class TokenPolicy {
public:
    using Gradient = TokenGradient;

    TokenPolicy() = default;
    // vocab: guidance words; the end marker is appended internally.
    TokenPolicy(const Vocabulary& guidance_vocab, int context_buckets, int max_len);

    int vocab_size() const { return vocab_size_; }  // includes the end marker
    int eos_id() const { return vocab_size_ - 1; }
    int context_buckets() const { return context_buckets_; }
    int max_len() const { return max_len_; }
    const Vocabulary& vocab() const { return vocab_; }            // with end marker
    const Vocabulary& guidance_vocab() const { return guidance_vocab_; }

    std::vector<double>& start_logits() { return start_; }
    const std::vector<double>& start_logits() const { return start_; }
    std::vector<std::vector<double>>& bigram_logits() { return bigram_; }
    const std::vector<std::vector<double>>& bigram_logits() const { return bigram_; }
    std::vector<std::vector<double>>& context_logits() { return context_; }
    const std::vector<std::vector<double>>& context_logits() const { return context_; }

    size_t bucket(const std::string& context) const {
        return static_cast<size_t>(fnv1a(context) % static_cast<uint64_t>(context_buckets_));
    }

    // logits over the alphabet at one position; prev < 0 means first position
    std::vector<double> position_logits(size_t bucket, int prev) const;

    double log_prob(const std::string& context, const std::vector<int>& tokens) const;
    Guidance sample(const std::string& context, double temperature, RandomSource& rng) const;
    TokenGradient log_prob_grad(const std::string& context, const std::vector<int>& tokens) const;

    TokenGradient zeros_like() const;
    void apply_step(const TokenGradient& grad, double scale);

    std::vector<double*> param_ptrs();
    std::vector<double> flatten_gradient(const TokenGradient& grad) const;

private:
    void check_tokens(const std::vector<int>& tokens) const;

    int vocab_size_ = 0;
    int context_buckets_ = 0;
    int max_len_ = 0;
    Vocabulary vocab_;           // guidance words + end marker
    Vocabulary guidance_vocab_;  // guidance words only
    std::vector<double> start_;
    std::vector<std::vector<double>> bigram_;
    std::vector<std::vector<double>> context_;
};

inline TokenPolicy clone_frozen(const TokenPolicy& p) { return p; }

// Free-function spellings shared by generic training code.
inline double log_prob(const PolicyTable& p, const std::string& ctx, const std::vector<int>& t) {
    return p.log_prob(ctx, t);
}
inline double log_prob(const TokenPolicy& p, const std::string& ctx, const std::vector<int>& t) {
    return p.log_prob(ctx, t);
}

// FNV-1a digest over the flattened parameters; identical policies hash equal.
uint64_t policy_checksum(const PolicyTable& p);
uint64_t policy_checksum(const TokenPolicy& p);

}  // namespace gforge
