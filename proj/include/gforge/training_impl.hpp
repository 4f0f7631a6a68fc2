#pragma once
// Template bodies for training.hpp; include that header instead.

#include <cmath>

namespace gforge {

template <class P>
LossGrad<P> sft_loss(const P& policy, const std::vector<SftExample>& examples) {
    if (examples.empty()) throw EnvError("sft_loss requires at least one example");
    LossGrad<P> out;
    out.grad = policy.zeros_like();
    for (const auto& ex : examples) {
        out.loss -= log_prob(policy, ex.context, ex.guidance);
        out.grad.add_scaled(policy.log_prob_grad(ex.context, ex.guidance), -1.0);
    }
    const double inv = 1.0 / static_cast<double>(examples.size());
    out.loss *= inv;
    out.grad.scale(inv);
    return out;
}

template <class P>
LossGrad<P> dpo_loss(const P& policy, const P& reference,
                     const std::vector<PreferencePair>& pairs, const TrainConfig& config) {
    config.validate();
    if (pairs.empty()) throw EnvError("dpo_loss requires at least one pair");
    const double eps = config.label_smoothing;
    LossGrad<P> out;
    out.grad = policy.zeros_like();
    for (const auto& pair : pairs) {
        const double ref_pos = log_prob(reference, pair.context, pair.positive.tokens);
        const double ref_neg = log_prob(reference, pair.context, pair.negative.tokens);
        if (!std::isfinite(ref_pos) || !std::isfinite(ref_neg))
            throw SupportError("reference assigns zero probability to a pair guidance");
        const double lp_pos = log_prob(policy, pair.context, pair.positive.tokens);
        const double lp_neg = log_prob(policy, pair.context, pair.negative.tokens);
        const double z = ((lp_pos - ref_pos) - (lp_neg - ref_neg)) / config.eta;
        out.loss += -(1.0 - eps) * log_sigmoid(z) - eps * log_sigmoid(-z);
        // d loss / d z, then chain through the two log-probs of the policy
        const double dz = -(1.0 - eps) * sigmoid(-z) + eps * sigmoid(z);
        out.grad.add_scaled(policy.log_prob_grad(pair.context, pair.positive.tokens),
                            dz / config.eta);
        out.grad.add_scaled(policy.log_prob_grad(pair.context, pair.negative.tokens),
                            -dz / config.eta);
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    out.loss *= inv;
    out.grad.scale(inv);
    return out;
}

template <class P>
TrainResult<P> train(P policy, size_t n_items,
                     const std::function<LossGrad<P>(const P&, const std::vector<size_t>&)>& objective,
                     const TrainConfig& config) {
    config.validate();
    TrainResult<P> result;
    RandomSource rng(config.seed, fnv1a("train"));
    std::vector<size_t> order(n_items);
    for (size_t i = 0; i < n_items; ++i) order[i] = i;

    const size_t batch =
        config.batch_size <= 0 ? n_items : std::min<size_t>(n_items, config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (batch < n_items) rng.shuffle(order);
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t begin = 0; begin < n_items; begin += batch) {
            const size_t end = std::min(n_items, begin + batch);
            std::vector<size_t> indices(order.begin() + static_cast<long>(begin),
                                        order.begin() + static_cast<long>(end));
            LossGrad<P> lg = objective(policy, indices);
            if (!std::isfinite(lg.loss))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch), epoch);
            epoch_loss += lg.loss * static_cast<double>(indices.size());
            seen += indices.size();
            policy.apply_step(lg.grad, -config.learning_rate);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(seen));
    }
    result.policy = std::move(policy);
    return result;
}

template <class P>
TrainResult<P> train_sft(P policy, const std::vector<SftExample>& examples,
                         const TrainConfig& config) {
    if (examples.empty()) throw EnvError("train_sft requires examples");
    auto objective = [&examples](const P& p, const std::vector<size_t>& idx) {
        std::vector<SftExample> batch;
        batch.reserve(idx.size());
        for (size_t i : idx) batch.push_back(examples[i]);
        return sft_loss(p, batch);
    };
    return train<P>(std::move(policy), examples.size(), objective, config);
}

template <class P>
TrainResult<P> train_dpo(P policy, const P& reference, const std::vector<PreferencePair>& pairs,
                         const TrainConfig& config) {
    if (pairs.empty()) throw NoPairsError("train_dpo requires preference pairs");
    auto objective = [&pairs, &reference, &config](const P& p, const std::vector<size_t>& idx) {
        std::vector<PreferencePair> batch;
        batch.reserve(idx.size());
        for (size_t i : idx) batch.push_back(pairs[i]);
        return dpo_loss(p, reference, batch, config);
    };
    return train<P>(std::move(policy), pairs.size(), objective, config);
}

template <class P>
IgoResult<P> igo_iteration(const P& policy, const Environment& env,
                           const std::vector<Task>& tasks, const GuidanceDataset& previous,
                           const TrainConfig& config, const IgoOptions& options,
                           const RandomSource& rng) {
    const int round = previous.iteration + 1;
    RandomSource collect_rng = rng.derive("igo-collect", static_cast<uint64_t>(round));
    std::vector<Trajectory> trajectories =
        collect(policy, env, tasks, options.repetitions, options.max_turns, options.temperature,
                collect_rng, round, options.workers);

    IgoResult<P> result;
    result.dataset = bootstrap(previous, extract_signals(trajectories));

    ExpertFallback fallback;
    if (options.expert_fallback) {
        fallback.env = &env;
        fallback.tasks = &tasks;
    }
    RandomSource pair_rng = rng.derive("igo-pairs", static_cast<uint64_t>(round));
    result.pairs = curate_pairs(result.dataset, options.max_pairs_per_task, fallback, pair_rng);
    if (result.pairs.empty())
        throw NoPairsError("no preference pairs in round " + std::to_string(round));

    const P reference = clone_frozen(policy);
    TrainResult<P> trained = train_dpo(policy, reference, result.pairs, config);
    result.policy = std::move(trained.policy);
    result.loss_history = std::move(trained.loss_history);
    return result;
}

template <class P>
GradCheckReport check_gradients(P policy, const std::function<LossGrad<P>(const P&)>& objective,
                                double h, double tolerance) {
    GradCheckReport report;
    LossGrad<P> at_point = objective(policy);
    std::vector<double> analytic = policy.flatten_gradient(at_point.grad);
    std::vector<double*> params = policy.param_ptrs();
    report.n_params = params.size();
    for (size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + h;
        const double up = objective(policy).loss;
        *params[i] = saved - h;
        const double down = objective(policy).loss;
        *params[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) /
                           std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
        report.max_rel_err = std::max(report.max_rel_err, err);
    }
    report.pass = report.max_rel_err <= tolerance;
    return report;
}

}  // namespace gforge
