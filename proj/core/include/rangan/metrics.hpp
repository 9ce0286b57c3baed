#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rangan/errors.hpp"

namespace rangan {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;
};

/// Predicted positive iff score > threshold.
ConfusionCounts confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                          double threshold);

// 0/0 cases return 0 so reports never carry NaN.
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double f1_score(const ConfusionCounts& c);
/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

/// P(score_pos > score_neg) + 0.5 * P(tie), exact via ranks. Undefined
/// (nullopt) unless both classes are present.
std::optional<double> roc_auc(std::span<const double> scores,
                              std::span<const std::uint8_t> labels);

struct ThresholdStrategy {
    enum class Kind { MaxF1, Percentile };
    Kind kind = Kind::MaxF1;
    double percentile = 95.0;

    static ThresholdStrategy max_f1() { return {Kind::MaxF1, 0.0}; }
    static ThresholdStrategy percentile_of(double p) { return {Kind::Percentile, p}; }
};

/// MaxF1 sweeps every distinct score value and returns the threshold with
/// the highest F1 (ties resolved toward the lowest threshold; labels
/// required). Percentile returns the p-th percentile of the scores with
/// linear interpolation between order statistics (label-free).
double select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                        const ThresholdStrategy& strategy);

struct EvalReport {
    std::string method;
    int window_size = 0;
    double threshold = 0.0;
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> roc_auc;  // nullopt serializes as the string "NaN"

    /// Stable key order: method, window_size, threshold, tp, fp, fn, tn,
    /// precision, recall, f1, roc_auc.
    std::string to_json() const;
};

/// Threshold selection + confusion + rates + AUC in one deterministic pass.
/// method/window_size are left for the caller to fill.
EvalReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels,
                    const ThresholdStrategy& strategy);

}  // namespace rangan
