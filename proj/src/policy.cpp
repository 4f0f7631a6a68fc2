#include "gforge/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gforge {

double log_sum_exp(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;  // all -inf stays -inf
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
    std::vector<double> out(logits.size());
    if (temperature <= 0.0) {  // degenerate point mass on the argmax
        size_t best = argmax_lowest(logits);
        out.assign(logits.size(), 0.0);
        out[best] = 1.0;
        return out;
    }
    double m = logits[0];
    for (double x : logits) m = std::max(m, x);
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - m) / temperature);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

size_t argmax_lowest(const std::vector<double>& v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

size_t categorical_draw(const std::vector<double>& probs, RandomSource& rng) {
    double u = rng.next_double();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;  // guard against rounding at the top end
}

// ----------------------------- TableGradient -----------------------------

void TableGradient::add_scaled(const TableGradient& other, double alpha) {
    for (size_t c = 0; c < per_context.size(); ++c)
        for (size_t i = 0; i < per_context[c].size(); ++i)
            per_context[c][i] += alpha * other.per_context[c][i];
}

void TableGradient::scale(double alpha) {
    for (auto& row : per_context)
        for (double& x : row) x *= alpha;
}

// ----------------------------- PolicyTable -----------------------------

PolicyTable::PolicyTable(Vocabulary vocab, std::vector<Context> contexts)
    : vocab_(std::move(vocab)), contexts_(std::move(contexts)) {
    for (size_t c = 0; c < contexts_.size(); ++c) {
        auto& ctx = contexts_[c];
        if (ctx.guidances.size() < 2)
            throw ContextError("context '" + ctx.key + "' needs at least 2 guidances");
        if (ctx.logits.empty()) ctx.logits.assign(ctx.guidances.size(), 0.0);
        if (ctx.logits.size() != ctx.guidances.size())
            throw ContextError("context '" + ctx.key + "' has mismatched logits");
        for (const auto& g : ctx.guidances) {
            if (g.empty()) throw VocabError("empty guidance in context '" + ctx.key + "'");
            for (int t : g) vocab_.word(t);  // range check
        }
        auto [_, inserted] = index_.emplace(ctx.key, c);
        if (!inserted) throw ContextError("duplicate context key '" + ctx.key + "'");
    }
}

size_t PolicyTable::context_index(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw ContextError("unknown context '" + key + "'");
    return it->second;
}

std::vector<double> PolicyTable::probs(const std::string& key) const {
    return probs_at(context_index(key));
}

std::vector<double> PolicyTable::probs_at(size_t context_idx) const {
    return softmax(contexts_[context_idx].logits);
}

size_t PolicyTable::find_guidance(size_t context_idx, const std::vector<int>& tokens) const {
    const auto& gs = contexts_[context_idx].guidances;
    for (size_t i = 0; i < gs.size(); ++i)
        if (gs[i] == tokens) return i;
    throw ContextError("guidance not admissible in context '" + contexts_[context_idx].key + "'");
}

double PolicyTable::log_prob(const std::string& context, const std::vector<int>& tokens) const {
    size_t c = context_index(context);
    size_t i = find_guidance(c, tokens);
    const auto& logits = contexts_[c].logits;
    return logits[i] - log_sum_exp(logits);
}

Guidance PolicyTable::sample(const std::string& context, double temperature,
                             RandomSource& rng) const {
    size_t c = context_index(context);
    const auto& ctx = contexts_[c];
    size_t pick;
    if (temperature <= 0.0) {
        pick = argmax_lowest(ctx.logits);
    } else {
        pick = categorical_draw(softmax(ctx.logits, temperature), rng);
    }
    return make_guidance(ctx.guidances[pick], vocab_);
}

TableGradient PolicyTable::log_prob_grad(const std::string& context,
                                         const std::vector<int>& tokens) const {
    size_t c = context_index(context);
    size_t i = find_guidance(c, tokens);
    TableGradient grad = zeros_like();
    std::vector<double> p = probs_at(c);
    for (size_t j = 0; j < p.size(); ++j) grad.per_context[c][j] = -p[j];
    grad.per_context[c][i] += 1.0;
    return grad;
}

TableGradient PolicyTable::zeros_like() const {
    TableGradient g;
    g.per_context.resize(contexts_.size());
    for (size_t c = 0; c < contexts_.size(); ++c)
        g.per_context[c].assign(contexts_[c].logits.size(), 0.0);
    return g;
}

void PolicyTable::apply_step(const TableGradient& grad, double scale) {
    for (size_t c = 0; c < contexts_.size(); ++c)
        for (size_t i = 0; i < contexts_[c].logits.size(); ++i)
            contexts_[c].logits[i] += scale * grad.per_context[c][i];
}

std::vector<double*> PolicyTable::param_ptrs() {
    std::vector<double*> out;
    for (auto& ctx : contexts_)
        for (double& x : ctx.logits) out.push_back(&x);
    return out;
}

std::vector<double> PolicyTable::flatten_gradient(const TableGradient& grad) const {
    std::vector<double> out;
    for (const auto& row : grad.per_context) out.insert(out.end(), row.begin(), row.end());
    return out;
}

// ----------------------------- TokenGradient -----------------------------

void TokenGradient::add_scaled(const TokenGradient& other, double alpha) {
    for (size_t i = 0; i < start.size(); ++i) start[i] += alpha * other.start[i];
    for (size_t r = 0; r < bigram.size(); ++r)
        for (size_t i = 0; i < bigram[r].size(); ++i) bigram[r][i] += alpha * other.bigram[r][i];
    for (size_t r = 0; r < context.size(); ++r)
        for (size_t i = 0; i < context[r].size(); ++i)
            context[r][i] += alpha * other.context[r][i];
}

void TokenGradient::scale(double alpha) {
    for (double& x : start) x *= alpha;
    for (auto& row : bigram)
        for (double& x : row) x *= alpha;
    for (auto& row : context)
        for (double& x : row) x *= alpha;
}

// ----------------------------- TokenPolicy -----------------------------

namespace {
constexpr const char* kEndWord = "<end>";
}

TokenPolicy::TokenPolicy(const Vocabulary& guidance_vocab, int context_buckets, int max_len)
    : context_buckets_(context_buckets), max_len_(max_len), guidance_vocab_(guidance_vocab) {
    if (guidance_vocab.size() < 1) throw VocabError("token policy needs a nonempty vocabulary");
    if (context_buckets < 1) throw ContextError("token policy needs at least one context bucket");
    if (max_len < 1) throw VocabError("token policy max_len must be >= 1");
    std::vector<std::string> words = guidance_vocab.words();
    words.push_back(kEndWord);
    vocab_ = Vocabulary(std::move(words));
    vocab_size_ = vocab_.size();
    start_.assign(vocab_size_, 0.0);
    bigram_.assign(vocab_size_, std::vector<double>(vocab_size_, 0.0));
    context_.assign(context_buckets_, std::vector<double>(vocab_size_, 0.0));
}

std::vector<double> TokenPolicy::position_logits(size_t bucket, int prev) const {
    const std::vector<double>& base = prev < 0 ? start_ : bigram_[static_cast<size_t>(prev)];
    std::vector<double> out(base);
    const auto& ctx = context_[bucket];
    for (int i = 0; i < vocab_size_; ++i) out[static_cast<size_t>(i)] += ctx[static_cast<size_t>(i)];
    return out;
}

void TokenPolicy::check_tokens(const std::vector<int>& tokens) const {
    if (tokens.empty()) throw VocabError("guidance tokens must be nonempty");
    if (static_cast<int>(tokens.size()) > max_len_)
        throw VocabError("guidance exceeds max length " + std::to_string(max_len_));
    for (int t : tokens) {
        if (t < 0 || t >= vocab_size_) throw VocabError("token id out of range");
        if (t == eos_id()) throw VocabError("guidance must not contain the end marker");
    }
}

double TokenPolicy::log_prob(const std::string& context, const std::vector<int>& tokens) const {
    check_tokens(tokens);
    size_t b = bucket(context);
    double lp = 0.0;
    int prev = -1;
    for (int t : tokens) {
        std::vector<double> logits = position_logits(b, prev);
        lp += logits[static_cast<size_t>(t)] - log_sum_exp(logits);
        prev = t;
    }
    if (static_cast<int>(tokens.size()) < max_len_) {
        std::vector<double> logits = position_logits(b, prev);
        lp += logits[static_cast<size_t>(eos_id())] - log_sum_exp(logits);
    }
    return lp;
}

Guidance TokenPolicy::sample(const std::string& context, double temperature,
                             RandomSource& rng) const {
    size_t b = bucket(context);
    std::vector<int> tokens;
    int prev = -1;
    while (static_cast<int>(tokens.size()) < max_len_) {
        std::vector<double> logits = position_logits(b, prev);
        // the first position masks the end marker so sampled guidance is
        // always nonempty; log_prob stays unmasked (it scores sequences, the
        // empty one included, so the total mass sums to one)
        if (prev < 0) logits[static_cast<size_t>(eos_id())] = -1e300;
        int pick;
        if (temperature <= 0.0) {
            pick = static_cast<int>(argmax_lowest(logits));
        } else {
            pick = static_cast<int>(categorical_draw(softmax(logits, temperature), rng));
        }
        if (pick == eos_id()) break;
        tokens.push_back(pick);
        prev = pick;
    }
    return make_guidance(std::move(tokens), guidance_vocab_);
}

TokenGradient TokenPolicy::log_prob_grad(const std::string& context,
                                         const std::vector<int>& tokens) const {
    check_tokens(tokens);
    size_t b = bucket(context);
    TokenGradient grad = zeros_like();
    auto accumulate = [&](int prev, int target) {
        std::vector<double> logits = position_logits(b, prev);
        std::vector<double> p = softmax(logits);
        std::vector<double>& base =
            prev < 0 ? grad.start : grad.bigram[static_cast<size_t>(prev)];
        for (int i = 0; i < vocab_size_; ++i) {
            double d = -p[static_cast<size_t>(i)];
            base[static_cast<size_t>(i)] += d;
            grad.context[b][static_cast<size_t>(i)] += d;
        }
        base[static_cast<size_t>(target)] += 1.0;
        grad.context[b][static_cast<size_t>(target)] += 1.0;
    };
    int prev = -1;
    for (int t : tokens) {
        accumulate(prev, t);
        prev = t;
    }
    if (static_cast<int>(tokens.size()) < max_len_) accumulate(prev, eos_id());
    return grad;
}

TokenGradient TokenPolicy::zeros_like() const {
    TokenGradient g;
    g.start.assign(static_cast<size_t>(vocab_size_), 0.0);
    g.bigram.assign(static_cast<size_t>(vocab_size_),
                    std::vector<double>(static_cast<size_t>(vocab_size_), 0.0));
    g.context.assign(static_cast<size_t>(context_buckets_),
                     std::vector<double>(static_cast<size_t>(vocab_size_), 0.0));
    return g;
}

void TokenPolicy::apply_step(const TokenGradient& grad, double scale) {
    for (size_t i = 0; i < start_.size(); ++i) start_[i] += scale * grad.start[i];
    for (size_t r = 0; r < bigram_.size(); ++r)
        for (size_t i = 0; i < bigram_[r].size(); ++i) bigram_[r][i] += scale * grad.bigram[r][i];
    for (size_t r = 0; r < context_.size(); ++r)
        for (size_t i = 0; i < context_[r].size(); ++i)
            context_[r][i] += scale * grad.context[r][i];
}

std::vector<double*> TokenPolicy::param_ptrs() {
    std::vector<double*> out;
    for (double& x : start_) out.push_back(&x);
    for (auto& row : bigram_)
        for (double& x : row) out.push_back(&x);
    for (auto& row : context_)
        for (double& x : row) out.push_back(&x);
    return out;
}

std::vector<double> TokenPolicy::flatten_gradient(const TokenGradient& grad) const {
    std::vector<double> out;
    out.insert(out.end(), grad.start.begin(), grad.start.end());
    for (const auto& row : grad.bigram) out.insert(out.end(), row.begin(), row.end());
    for (const auto& row : grad.context) out.insert(out.end(), row.begin(), row.end());
    return out;
}

// ----------------------------- checksums -----------------------------

namespace {
uint64_t hash_doubles(uint64_t h, const std::vector<double>& v) {
    for (double x : v) {
        uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int b = 0; b < 64; b += 8) {
            h ^= (bits >> b) & 0xffu;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}
}  // namespace

uint64_t policy_checksum(const PolicyTable& p) {
    uint64_t h = fnv1a("table");
    for (const auto& ctx : p.contexts()) {
        h = fnv1a(ctx.key, h);
        for (const auto& g : ctx.guidances)
            for (int t : g) h = fnv1a(std::to_string(t), h);
        h = hash_doubles(h, ctx.logits);
    }
    return h;
}

uint64_t policy_checksum(const TokenPolicy& p) {
    uint64_t h = fnv1a("token");
    h = fnv1a(std::to_string(p.vocab_size()), h);
    h = fnv1a(std::to_string(p.context_buckets()), h);
    h = fnv1a(std::to_string(p.max_len()), h);
    h = hash_doubles(h, p.start_logits());
    for (const auto& row : p.bigram_logits()) h = hash_doubles(h, row);
    for (const auto& row : p.context_logits()) h = hash_doubles(h, row);
    return h;
}

}  // namespace gforge
