#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lpnsr/tensor.hpp"

namespace lpnsr {

// Named, ordered parameter collection for one network.
struct NetworkParams {
    std::string arch;
    std::vector<std::pair<std::string, Tensor>> entries;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const;

    // Aliased views sharing the underlying buffers.
    std::vector<Tensor> tensors();
    std::size_t param_count() const;

    void set_trainable(bool on);
    void zero_grad();

    // FNV-1a over the raw value bytes; used to prove a frozen network
    // was not touched.
    std::uint64_t value_checksum() const;
};

// Architecture tags. All three networks are 3-layer 3x3 conv stacks of the
// given width with a zero-initialized final layer; the denoiser and predictor
// additionally own one learned per-step bias scalar that enters as an input
// channel (denoiser: steps 1..T, predictor: steps 2..T, where it is used).
std::string denoiser_arch(int channels, int width, int T);
std::string predictor_arch(int channels, int width, int T);
std::string upsampler_arch(int channels, int width);

// Deterministic initialization: fan-in-scaled uniform conv weights, zeros for
// biases, the final layer, and the step embeddings. Throws ConfigError on an
// unknown tag.
NetworkParams init_params(const std::string& arch, std::uint64_t seed);

// x0 prediction: x_t + residual(concat(x_t, y0, embed(t))). kink_probe, when
// non-null, collects every activation pre-value (finite-difference support).
Tensor denoiser_forward(Tape* tape, const NetworkParams& params, const Tensor& x_t,
                        const Tensor& y0, int t, std::vector<float>* kink_probe = nullptr);

// Unconstrained noise map from (x_t, x0_pred, y0, t); rejects t = 1.
Tensor predictor_forward(Tape* tape, const NetworkParams& params, const Tensor& x_t,
                         const Tensor& x0_pred, const Tensor& y0, int t,
                         std::vector<float>* kink_probe = nullptr);

// x4 regression upsampling: bicubic(y_lr) + refinement(bicubic(y_lr)).
Tensor upsampler_forward(Tape* tape, const NetworkParams& params, const Tensor& y_lr,
                         std::vector<float>* kink_probe = nullptr);

// Denoiser abstraction so evaluation code can swap in the oracle double.
using DenoiserFn = std::function<Tensor(Tape*, const Tensor& x_t, const Tensor& y0, int t)>;

DenoiserFn make_denoiser(const NetworkParams& params);
// Test double: returns the ground truth regardless of x_t.
DenoiserFn make_oracle_denoiser(const Tensor& x0);

}  // namespace lpnsr
