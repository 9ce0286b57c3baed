#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rangan/windowing.hpp"

namespace rangan {

/// Per-feature |x - mean| / std maximum over a window; stats fitted on the
/// training windows, zero-variance features skipped.
class ZscoreDetector {
public:
    void fit(const WindowSet& train);
    std::vector<double> score(const WindowSet& windows) const;
    double score_one(std::span<const double> window) const;

private:
    std::vector<double> mean_;
    std::vector<double> std_;
    std::size_t feature_count_ = 0;
};

/// Average path length of an unsuccessful BST search over n points;
/// normalizes isolation-forest path lengths. c(1) = 0, c(2) = 1.
double iforest_average_path_length(std::size_t n);

struct IsolationForestConfig {
    int n_trees = 100;
    int subsample = 256;
    std::uint64_t seed = 0;
};

/// Classic isolation forest over flattened windows. Scores lie in (0, 1),
/// 2^(-E[path]/c(subsample)); deterministic for a fixed seed. A subsample
/// larger than the training set is reduced to it with a warning on stderr.
class IsolationForest {
public:
    explicit IsolationForest(IsolationForestConfig cfg = {}) : cfg_(cfg) {}
    void fit(const WindowSet& train);
    std::vector<double> score(const WindowSet& windows) const;
    double score_one(std::span<const double> window) const;

private:
    struct Node {
        int feature = -1;        // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
        std::size_t size = 0;
    };
    double path_length(const std::vector<Node>& tree, const double* x) const;

    IsolationForestConfig cfg_;
    std::vector<std::vector<Node>> trees_;
    std::size_t dim_ = 0;
    std::size_t subsample_used_ = 0;
};

struct LofConfig {
    int k = 20;
};

/// Local outlier factor against the training windows (brute-force exact
/// neighbors; desk scale). LOF ~ 1 in uniform density, > 1 for outliers.
/// Duplicate points get distance-0 reachability; density denominators are
/// regularized by 1e-10 so degenerate clusters stay finite.
class LocalOutlierFactor {
public:
    explicit LocalOutlierFactor(LofConfig cfg = {}) : cfg_(cfg) {}
    void fit(const WindowSet& train);
    std::vector<double> score(const WindowSet& windows) const;

private:
    LofConfig cfg_;
    std::vector<double> train_;      // N x dim
    std::vector<double> kdist_;      // N
    std::vector<double> lrd_;        // N
    std::size_t n_ = 0;
    std::size_t dim_ = 0;
};

struct AutoencoderConfig {
    int hidden_dim = 64;
    int bottleneck_dim = 16;
    int epochs = 15;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

/// Dense w*F -> bottleneck -> w*F autoencoder trained with mean squared
/// error; the anomaly score is a window's mean squared reconstruction error.
class WindowAutoencoder {
public:
    explicit WindowAutoencoder(AutoencoderConfig cfg = {}) : cfg_(cfg) {}
    void fit(const WindowSet& train);
    std::vector<double> score(const WindowSet& windows) const;
    double score_one(std::span<const double> window) const;

private:
    struct Impl;
    AutoencoderConfig cfg_;
    std::shared_ptr<Impl> impl_;
};

}  // namespace rangan
