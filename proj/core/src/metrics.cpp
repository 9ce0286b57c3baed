#include "rangan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace rangan {

ConfusionCounts confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold) {
    if (scores.size() != labels.size())
        throw ContractError("confusion: scores and labels lengths differ (" +
                            std::to_string(scores.size()) + " vs " +
                            std::to_string(labels.size()) + ")");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        if (labels[i]) {
            pred ? ++c.tp : ++c.fn;
        } else {
            pred ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

double precision(const ConfusionCounts& c) {
    const long den = c.tp + c.fp;
    return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
}

double recall(const ConfusionCounts& c) {
    const long den = c.tp + c.fn;
    return den == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(den);
}

double f1_score(const ConfusionCounts& c) { return f1_score(precision(c), recall(c)); }

double f1_score(double precision, double recall) {
    const double den = precision + recall;
    return den == 0.0 ? 0.0 : 2.0 * precision * recall / den;
}

std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size())
        throw ContractError("roc_auc: scores and labels lengths differ");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (auto l : labels) pos += l ? 1 : 0;
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, then the Mann-Whitney identity
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[idx[k]]) pos_rank_sum += avg_rank;
        i = j + 1;
    }
    const double p = static_cast<double>(pos);
    return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                        const ThresholdStrategy& strategy) {
    if (scores.empty()) throw ContractError("select_threshold: empty score trace");

    if (strategy.kind == ThresholdStrategy::Kind::Percentile) {
        const double p = strategy.percentile;
        if (p < 0.0 || p > 100.0)
            throw ContractError("select_threshold: percentile must lie in [0, 100]");
        std::vector<double> sorted(scores.begin(), scores.end());
        std::sort(sorted.begin(), sorted.end());
        const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    }

    if (labels.size() != scores.size())
        throw ContractError("select_threshold: max_f1 needs labels aligned with scores");
    std::vector<double> candidates(scores.begin(), scores.end());
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    double best_t = candidates.front();
    double best_f1 = -1.0;
    for (double t : candidates) {
        const double f = f1_score(confusion(scores, labels, t));
        if (f > best_f1) {  // strict: ties keep the lowest threshold
            best_f1 = f;
            best_t = t;
        }
    }
    return best_t;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["method"] = method;
    j["window_size"] = window_size;
    j["threshold"] = threshold;
    j["tp"] = tp;
    j["fp"] = fp;
    j["fn"] = fn;
    j["tn"] = tn;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    if (roc_auc.has_value())
        j["roc_auc"] = *roc_auc;
    else
        j["roc_auc"] = "NaN";
    return j.dump(2) + "\n";
}

EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                    const ThresholdStrategy& strategy) {
    EvalReport r;
    r.threshold = select_threshold(scores, labels, strategy);
    const ConfusionCounts c = confusion(scores, labels, r.threshold);
    r.tp = c.tp;
    r.fp = c.fp;
    r.fn = c.fn;
    r.tn = c.tn;
    r.precision = precision(c);
    r.recall = recall(c);
    r.f1 = f1_score(c);
    r.roc_auc = roc_auc(scores, labels);
    return r;
}

}  // namespace rangan
