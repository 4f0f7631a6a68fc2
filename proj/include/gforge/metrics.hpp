#pragma once
// Evaluation metrics: exact-match accuracy, macro F1, MAE/RMSE, ROUGE-1,
// ROUGE-L, smoothed BLEU, and episode success rate. Text metrics tokenize by
// lowercasing and splitting on whitespace; no stemming, no multi-reference
// variants.

#include <map>
#include <string>
#include <vector>

namespace gforge {

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& references);

// Unweighted mean of per-label F1. A label absent from both sides contributes
// zero to the mean.
double macro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& references,
                const std::vector<std::string>& labels);

std::pair<double, double> mae_rmse(const std::vector<long long>& predictions,
                                   const std::vector<long long>& references);

double rouge1(const std::string& candidate, const std::string& reference);
double rougeL(const std::string& candidate, const std::string& reference);

// Geometric mean of modified n-gram precisions with a brevity penalty;
// zero-count precisions get add-one smoothing so short references do not
// collapse the score to zero.
double bleu(const std::string& candidate, const std::string& reference, int max_n = 4);

double success_rate(const std::vector<bool>& episodes);

std::vector<std::string> tokenize_lower(const std::string& text);

struct MetricReport {
    std::map<std::string, double> overall;  // metric name -> value
    size_t sample_count = 0;
    std::map<std::string, std::map<std::string, double>> per_kind;
    std::map<std::string, size_t> kind_counts;
};

}  // namespace gforge
