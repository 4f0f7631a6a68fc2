#include "gforge/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "gforge/core.hpp"

namespace gforge {

std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        tokens.push_back(word);
    }
    return tokens;
}

namespace {

std::string normalize_ws(const std::string& s) {
    std::istringstream in(s);
    std::string word, out;
    while (in >> word) {
        if (!out.empty()) out += ' ';
        out += word;
    }
    return out;
}

}  // namespace

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& references) {
    if (predictions.size() != references.size() || predictions.empty())
        throw ShapeError("accuracy requires equally sized, nonempty lists");
    size_t hits = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if (normalize_ws(predictions[i]) == normalize_ws(references[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double macro_f1(const std::vector<std::string>& predictions,
                const std::vector<std::string>& references,
                const std::vector<std::string>& labels) {
    if (predictions.size() != references.size() || predictions.empty())
        throw ShapeError("macro_f1 requires equally sized, nonempty lists");
    if (labels.empty()) throw LabelError("macro_f1 requires a label set");
    std::set<std::string> label_set(labels.begin(), labels.end());
    for (const auto& v : predictions)
        if (!label_set.count(v)) throw LabelError("unknown predicted label '" + v + "'");
    for (const auto& v : references)
        if (!label_set.count(v)) throw LabelError("unknown reference label '" + v + "'");

    double sum = 0.0;
    for (const auto& label : label_set) {
        size_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < predictions.size(); ++i) {
            const bool pred = predictions[i] == label;
            const bool ref = references[i] == label;
            if (pred && ref) ++tp;
            else if (pred) ++fp;
            else if (ref) ++fn;
        }
        if (tp + fp + fn == 0 || tp == 0) continue;  // F1 = 0 either way
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        sum += 2.0 * precision * recall / (precision + recall);
    }
    return sum / static_cast<double>(label_set.size());
}

std::pair<double, double> mae_rmse(const std::vector<long long>& predictions,
                                   const std::vector<long long>& references) {
    if (predictions.size() != references.size() || predictions.empty())
        throw ShapeError("mae_rmse requires equally sized, nonempty lists");
    double abs_sum = 0.0, sq_sum = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double d = static_cast<double>(predictions[i] - references[i]);
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double n = static_cast<double>(predictions.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

namespace {

// clipped unigram overlap and harmonic F1 shared by the two ROUGE variants
double overlap_f1(size_t overlap, size_t cand_len, size_t ref_len) {
    if (overlap == 0 || cand_len == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(cand_len);
    const double r = static_cast<double>(overlap) / static_cast<double>(ref_len);
    return 2.0 * p * r / (p + r);
}

}  // namespace

double rouge1(const std::string& candidate, const std::string& reference) {
    std::vector<std::string> ref = tokenize_lower(reference);
    if (ref.empty()) throw ShapeError("rouge1 requires a nonempty reference");
    std::vector<std::string> cand = tokenize_lower(candidate);
    if (cand.empty()) return 0.0;
    std::map<std::string, size_t> ref_counts;
    for (const auto& w : ref) ++ref_counts[w];
    size_t overlap = 0;
    for (const auto& w : cand) {
        auto it = ref_counts.find(w);
        if (it != ref_counts.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    return overlap_f1(overlap, cand.size(), ref.size());
}

double rougeL(const std::string& candidate, const std::string& reference) {
    std::vector<std::string> ref = tokenize_lower(reference);
    if (ref.empty()) throw ShapeError("rougeL requires a nonempty reference");
    std::vector<std::string> cand = tokenize_lower(candidate);
    if (cand.empty()) return 0.0;
    std::vector<std::vector<size_t>> lcs(cand.size() + 1, std::vector<size_t>(ref.size() + 1, 0));
    for (size_t i = 1; i <= cand.size(); ++i) {
        for (size_t j = 1; j <= ref.size(); ++j) {
            if (cand[i - 1] == ref[j - 1]) lcs[i][j] = lcs[i - 1][j - 1] + 1;
            else lcs[i][j] = std::max(lcs[i - 1][j], lcs[i][j - 1]);
        }
    }
    return overlap_f1(lcs[cand.size()][ref.size()], cand.size(), ref.size());
}

double bleu(const std::string& candidate, const std::string& reference, int max_n) {
    std::vector<std::string> ref = tokenize_lower(reference);
    if (ref.empty()) throw ShapeError("bleu requires a nonempty reference");
    if (max_n < 1) throw ShapeError("bleu requires max_n >= 1");
    std::vector<std::string> cand = tokenize_lower(candidate);
    if (cand.empty()) return 0.0;

    double log_precisions = 0.0;
    int used = 0;
    for (int n = 1; n <= max_n; ++n) {
        if (cand.size() < static_cast<size_t>(n)) break;  // no n-grams of this order
        std::map<std::vector<std::string>, size_t> ref_counts;
        for (size_t i = 0; i + n <= ref.size(); ++i)
            ++ref_counts[std::vector<std::string>(ref.begin() + i, ref.begin() + i + n)];
        size_t total = 0, matched = 0;
        for (size_t i = 0; i + n <= cand.size(); ++i) {
            ++total;
            auto it = ref_counts.find(std::vector<std::string>(cand.begin() + i, cand.begin() + i + n));
            if (it != ref_counts.end() && it->second > 0) {
                ++matched;
                --it->second;
            }
        }
        double p;
        if (matched == 0) p = 1.0 / static_cast<double>(total + 1);  // add-one smoothing
        else p = static_cast<double>(matched) / static_cast<double>(total);
        log_precisions += std::log(p);
        ++used;
    }
    if (used == 0) return 0.0;
    const double geo_mean = std::exp(log_precisions / static_cast<double>(used));
    const double bp = cand.size() >= ref.size()
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref.size()) /
                                               static_cast<double>(cand.size()));
    return bp * geo_mean;
}

double success_rate(const std::vector<bool>& episodes) {
    if (episodes.empty()) throw ShapeError("success_rate requires at least one episode");
    size_t wins = 0;
    for (bool b : episodes)
        if (b) ++wins;
    return static_cast<double>(wins) / static_cast<double>(episodes.size());
}

}  // namespace gforge
