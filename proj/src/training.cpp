#include "gforge/training.hpp"

#include <algorithm>
#include <cmath>

namespace gforge {

void TrainConfig::validate() const {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(label_smoothing >= 0.0 && label_smoothing < 0.5))
        throw ConfigError("label_smoothing must lie in [0, 0.5)");
}

double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double bt_probability(double u_plus, double u_minus) {
    if (!std::isfinite(u_plus) || !std::isfinite(u_minus))
        throw EnvError("bt_probability requires finite utilities");
    return sigmoid(u_plus - u_minus);
}

PolicyTable closed_form_policy(const PolicyTable& ref,
                               const std::vector<std::vector<double>>& utilities, double eta) {
    if (utilities.size() != ref.contexts().size())
        throw ShapeError("utilities must align with the reference contexts");
    std::vector<PolicyTable::Context> contexts;
    for (size_t c = 0; c < ref.contexts().size(); ++c) {
        const auto& src = ref.contexts()[c];
        if (utilities[c].size() != src.guidances.size())
            throw ShapeError("utilities must align with the guidances of context '" + src.key + "'");
        std::vector<double> ref_probs = ref.probs_at(c);
        PolicyTable::Context out{src.key, src.guidances, {}};
        out.logits.resize(src.guidances.size());
        double best = -1e300;
        for (size_t i = 0; i < src.guidances.size(); ++i) {
            if (!std::isfinite(utilities[c][i]))
                throw DegenerateError("non-finite utility in context '" + src.key + "'");
            out.logits[i] = std::log(ref_probs[i]) + eta * utilities[c][i];
            best = std::max(best, out.logits[i]);
        }
        if (!std::isfinite(best))
            throw DegenerateError("all reference mass vanished in context '" + src.key + "'");
        contexts.push_back(std::move(out));
    }
    return PolicyTable(ref.vocab(), std::move(contexts));
}

double kl_divergence(const PolicyTable& p, const PolicyTable& q, const std::string& context) {
    std::vector<double> pp = p.probs(context);
    std::vector<double> qp = q.probs(context);
    if (pp.size() != qp.size()) throw ShapeError("policies disagree on the guidance set");
    double kl = 0.0;
    for (size_t i = 0; i < pp.size(); ++i) {
        if (pp[i] <= 0.0) continue;
        if (qp[i] <= 0.0) throw SupportError("q must cover the support of p");
        kl += pp[i] * std::log(pp[i] / qp[i]);
    }
    return kl;
}

double kl_objective_value(const std::vector<double>& probs, const std::vector<double>& ref_probs,
                          const std::vector<double>& utilities, double eta) {
    if (probs.size() != ref_probs.size() || probs.size() != utilities.size())
        throw ShapeError("kl_objective_value requires aligned vectors");
    double expected = 0.0;
    double kl = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        expected += probs[i] * utilities[i];
        if (probs[i] <= 0.0) continue;
        if (ref_probs[i] <= 0.0) throw SupportError("reference must cover the policy support");
        kl += probs[i] * std::log(probs[i] / ref_probs[i]);
    }
    return expected - kl / eta;
}

DpoRecoveryReport verify_dpo_recovers_optimum(const std::vector<double>& utilities, double eta,
                                              size_t n_pairs, const RandomSource& rng,
                                              int epochs, double learning_rate) {
    if (utilities.size() < 2) throw ShapeError("fixture needs at least two guidances");

    // single-context tabular fixture over one-token guidances g0..g{k-1}
    const size_t k = utilities.size();
    std::vector<std::string> words;
    for (size_t i = 0; i < k; ++i) words.push_back("g" + std::to_string(i));
    Vocabulary vocab(words);
    std::vector<std::vector<int>> guidances;
    for (size_t i = 0; i < k; ++i) guidances.push_back({static_cast<int>(i)});
    PolicyTable uniform(vocab, {PolicyTable::Context{"fixture", guidances, {}}});

    // candidates drawn uniformly, winner drawn from the Bradley-Terry model
    // over the true utilities
    RandomSource pair_rng = rng.derive("bt-pairs");
    std::vector<PreferencePair> pairs;
    pairs.reserve(n_pairs);
    for (size_t p = 0; p < n_pairs; ++p) {
        const size_t a = pair_rng.next_below(k);
        size_t b = pair_rng.next_below(k - 1);
        if (b >= a) ++b;
        const bool a_wins = pair_rng.next_double() < bt_probability(utilities[a], utilities[b]);
        const size_t pos = a_wins ? a : b;
        const size_t neg = a_wins ? b : a;
        pairs.push_back(PreferencePair{"fixture", "fixture", "",
                                       make_guidance(guidances[pos], vocab),
                                       make_guidance(guidances[neg], vocab)});
    }

    TrainConfig config;
    config.eta = eta;
    config.learning_rate = learning_rate;
    config.epochs = epochs;
    config.label_smoothing = 0.0;  // smoothing would bias the recovered optimum
    config.seed = rng.seed();
    TrainResult<PolicyTable> trained = train_dpo(uniform, uniform, pairs, config);

    PolicyTable target = closed_form_policy(uniform, {utilities}, eta);
    DpoRecoveryReport report;
    report.n_guidances = k;
    report.n_pairs = n_pairs;
    report.trained_probs = trained.policy.probs("fixture");
    report.target_probs = target.probs("fixture");
    report.final_loss = trained.loss_history.empty() ? 0.0 : trained.loss_history.back();
    double tv = 0.0;
    for (size_t i = 0; i < k; ++i)
        tv += std::abs(report.trained_probs[i] - report.target_probs[i]);
    report.total_variation = 0.5 * tv;
    return report;
}

}  // namespace gforge
