#pragma once
// Learning objectives for the controller: behavior-cloning SFT, the
// Bradley-Terry preference probability, the KL-regularized objective with its
// closed-form optimum, DPO with optional two-sided label smoothing, a plain
// full-batch/minibatch gradient-descent loop, the iterative guidance
// optimization round, and gradient verification against central finite
// differences.

#include <functional>
#include <string>
#include <vector>

#include "gforge/environment.hpp"
#include "gforge/interaction.hpp"
#include "gforge/policy.hpp"
#include "gforge/rng.hpp"

namespace gforge {

struct TrainConfig {
    double eta = 1.0;            // KL weight; the preference margin is scaled by 1/eta
    double learning_rate = 0.5;
    int epochs = 200;
    double label_smoothing = 0.1;  // two-sided smoothing epsilon in [0, 0.5)
    int batch_size = 0;            // 0 = full batch
    uint64_t seed = 0;

    void validate() const;
};

struct SftExample {
    std::string context;  // policy context key derived from the task
    std::string prompt;
    std::vector<int> guidance;  // target token sequence
};

// numerically stable log(sigmoid(x)) and sigmoid(x)
double log_sigmoid(double x);
double sigmoid(double x);

// sigma(u_plus - u_minus): probability the first candidate is preferred
double bt_probability(double u_plus, double u_minus);

// ----------------------------- losses -----------------------------

template <class P>
struct LossGrad {
    double loss = 0.0;
    typename P::Gradient grad;
};

// Negative mean sequence log-likelihood of the targets.
template <class P>
LossGrad<P> sft_loss(const P& policy, const std::vector<SftExample>& examples);

// Mean smoothed DPO loss over pairs:
//   z = [ (log pi(g+) - log ref(g+)) - (log pi(g-) - log ref(g-)) ] / eta
//   loss = -(1 - eps) log sigma(z) - eps log sigma(-z)
// The gradient flows through the trained policy only.
template <class P>
LossGrad<P> dpo_loss(const P& policy, const P& reference,
                     const std::vector<PreferencePair>& pairs, const TrainConfig& config);

// ----------------------------- tabular closed form -----------------------------

// pi*(g|x) proportional to ref(g|x) * exp(eta * u(x, g)), per context.
// utilities[c][i] aligns with ref.contexts()[c].guidances[i].
PolicyTable closed_form_policy(const PolicyTable& ref,
                               const std::vector<std::vector<double>>& utilities, double eta);

double kl_divergence(const PolicyTable& p, const PolicyTable& q, const std::string& context);

// E_pi[u] - KL(pi || ref) / eta for one context, evaluated at explicit probs.
double kl_objective_value(const std::vector<double>& probs, const std::vector<double>& ref_probs,
                          const std::vector<double>& utilities, double eta);

// ----------------------------- optimizer -----------------------------

template <class P>
struct TrainResult {
    P policy;
    std::vector<double> loss_history;  // mean loss per epoch
};

// Plain gradient descent with a fixed step size. The objective maps
// (policy, item indices) to a summed loss and gradient over those items;
// full-batch mode passes all indices each epoch, minibatch mode shuffles and
// chunks them with the config seed.
template <class P>
TrainResult<P> train(P policy, size_t n_items,
                     const std::function<LossGrad<P>(const P&, const std::vector<size_t>&)>& objective,
                     const TrainConfig& config);

template <class P>
TrainResult<P> train_sft(P policy, const std::vector<SftExample>& examples,
                         const TrainConfig& config);

template <class P>
TrainResult<P> train_dpo(P policy, const P& reference, const std::vector<PreferencePair>& pairs,
                         const TrainConfig& config);

// ----------------------------- IGO round -----------------------------

struct IgoOptions {
    int repetitions = 10;       // K rollouts per task
    int max_turns = 1;          // T turns per rollout
    double temperature = 1.0;   // sampling temperature during collection
    int max_pairs_per_task = 2;
    bool expert_fallback = true;
    int workers = 1;
};

template <class P>
struct IgoResult {
    P policy;                    // trained for the next round
    GuidanceDataset dataset;     // bootstrapped pools after this round
    std::vector<PreferencePair> pairs;
    std::vector<double> loss_history;
};

// One round: collect with the current policy, fold the signals into the
// dataset, curate pairs, then run DPO against a frozen snapshot of the
// current policy as the reference.
template <class P>
IgoResult<P> igo_iteration(const P& policy, const Environment& env,
                           const std::vector<Task>& tasks, const GuidanceDataset& previous,
                           const TrainConfig& config, const IgoOptions& options,
                           const RandomSource& rng);

// ----------------------------- verification -----------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t n_params = 0;
    bool pass = false;
};

// Central finite differences over every parameter. The per-coordinate error
// is |analytic - numeric| / max(1, |analytic|, |numeric|).
template <class P>
GradCheckReport check_gradients(P policy, const std::function<LossGrad<P>(const P&)>& objective,
                                double h = 1e-5, double tolerance = 1e-5);

struct DpoRecoveryReport {
    size_t n_guidances = 0;
    size_t n_pairs = 0;
    double total_variation = 0.0;
    double final_loss = 0.0;
    std::vector<double> trained_probs;
    std::vector<double> target_probs;
};

// Samples preference pairs from the Bradley-Terry model over the true
// utilities, trains a tabular policy with DPO from a uniform reference, and
// reports the total-variation distance to the closed-form optimum. Label
// smoothing is off here: a smoothed loss recovers a flattened optimum.
DpoRecoveryReport verify_dpo_recovers_optimum(const std::vector<double>& utilities, double eta,
                                              size_t n_pairs, const RandomSource& rng,
                                              int epochs = 400, double learning_rate = 0.5);

}  // namespace gforge

#include "gforge/training_impl.hpp"
