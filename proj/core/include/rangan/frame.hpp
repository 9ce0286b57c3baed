#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rangan/errors.hpp"

namespace rangan {

/// Timestamped multivariate KPI matrix, optionally labeled per timestep.
/// Row-major storage: features[t * feature_count() + f].
struct KpiFrame {
    std::vector<std::int64_t> timestamps;   // strictly increasing, seconds
    std::vector<double> features;           // T x F
    std::vector<std::string> feature_names; // F
    std::vector<std::uint8_t> labels;       // empty, or length T with values {0, 1}

    std::size_t size() const { return timestamps.size(); }
    std::size_t feature_count() const { return feature_names.size(); }
    bool has_labels() const { return !labels.empty(); }

    double at(std::size_t t, std::size_t f) const { return features[t * feature_count() + f]; }
    double& at(std::size_t t, std::size_t f) { return features[t * feature_count() + f]; }

    /// Throws ContractError when the field lengths disagree.
    void validate() const;

    /// Keep only the named KPI columns, in the order given.
    KpiFrame select(const std::vector<std::string>& names) const;
};

/// Per-feature min/max fitted on training data only.
struct NormalizationParams {
    std::vector<double> min;
    std::vector<double> max;
};

/// CSV schema: header row; column 1 "timestamp" (integer seconds), optional
/// final column "label" (0/1), every other column a numeric KPI. UTF-8,
/// comma separated, '.' decimal point. Empty KPI cells are forward-filled
/// from the previous row (zero-filled when there is no previous value).
KpiFrame load_csv(const std::string& path);
void save_csv(const KpiFrame& frame, const std::string& path);

NormalizationParams fit_minmax(const KpiFrame& frame);

/// x' = (x - min) / (max - min), clipped to [0, 1]; constant features map to 0.
KpiFrame apply_minmax(const KpiFrame& frame, const NormalizationParams& params);

/// Chronological prefix/suffix split; the prefix holds
/// floor(train_fraction * T) rows. No shuffling.
std::pair<KpiFrame, KpiFrame> split(const KpiFrame& frame, double train_fraction);

}  // namespace rangan
