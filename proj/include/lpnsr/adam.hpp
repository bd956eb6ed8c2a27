#pragma once

#include <cstdint>
#include <vector>

#include "lpnsr/tensor.hpp"

namespace lpnsr {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 1e-4f;  // decoupled
};

// Per-parameter first/second moment state. Parameter order is fixed at
// init() and must match every step() call.
class AdamState {
public:
    void init(const std::vector<Tensor>& params, const AdamConfig& cfg);
    // Reads gradients from the parameter slots and updates values in place.
    void step(std::vector<Tensor>& params);

    std::int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    std::int64_t step_count_ = 0;
};

}  // namespace lpnsr
