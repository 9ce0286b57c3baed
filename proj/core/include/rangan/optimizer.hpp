#pragma once

#include <cstdint>
#include <vector>

#include "rangan/tensor.hpp"

namespace rangan {

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;  // GAN-stable momentum
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment optimizer over a fixed parameter list.
/// Moments start at zero; step() consumes and then clears the gradients.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, AdamConfig cfg = {});

    /// One update. Parameters without an accumulated gradient are treated
    /// as zero-gradient (left unchanged apart from moment decay).
    void step();

    std::int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<double>& first_moment(std::size_t param) const { return m_[param]; }
    const std::vector<double>& second_moment(std::size_t param) const { return v_[param]; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig cfg_;
    std::int64_t step_count_ = 0;
};

}  // namespace rangan
