#include "rangan/optimizer.hpp"

#include <cmath>

namespace rangan {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.learning_rate <= 0 || cfg_.beta1 <= 0 || cfg_.beta2 <= 0 || cfg_.epsilon <= 0)
        throw ContractError("adam: learning_rate/beta1/beta2/epsilon must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        const bool has = p.has_grad();
        const double* g = has ? p.grad().data() : nullptr;
        double* w = p.data_mut().data();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double gi = has ? g[i] : 0.0;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
        p.zero_grad();
    }
}

}  // namespace rangan
