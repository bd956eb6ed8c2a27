#include "lpnsr/adam.hpp"

#include <cmath>

namespace lpnsr {

void AdamState::init(const std::vector<Tensor>& params, const AdamConfig& cfg) {
    cfg_ = cfg;
    step_count_ = 0;
    m_.clear();
    v_.clear();
    for (const Tensor& p : params) {
        m_.emplace_back(p.numel(), 0.0f);
        v_.emplace_back(p.numel(), 0.0f);
    }
}

void AdamState::step(std::vector<Tensor>& params) {
    if (params.size() != m_.size()) throw DimensionError("adam: parameter count changed since init");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (p.numel() != m_[i].size()) throw DimensionError("adam: parameter shape changed since init");
        const std::vector<float> g = p.grad();
        float* w = p.data();
        float* m = m_[i].data();
        float* v = v_[i].data();
        for (std::size_t k = 0; k < g.size(); ++k) {
            m[k] = cfg_.beta1 * m[k] + (1.0f - cfg_.beta1) * g[k];
            v[k] = cfg_.beta2 * v[k] + (1.0f - cfg_.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            // Decoupled weight decay.
            w[k] -= static_cast<float>(cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[k]));
        }
    }
}

}  // namespace lpnsr
