#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lpnsr/data.hpp"
#include "lpnsr/diffusion.hpp"
#include "lpnsr/models.hpp"

namespace lpnsr {

enum class InitMode { Bicubic, Regression };

const char* init_mode_name(InitMode m);
InitMode init_mode_from_name(const std::string& name);

struct InferenceConfig {
    int t_start = 4;
    InitMode init = InitMode::Bicubic;
    NoiseStrategy strategy = NoiseStrategy::Predicted;
    std::uint64_t seed = 0;
};

// Network bundle for inference. The denoiser is a callable so the oracle test
// double drops in; predictor/upsampler are optional per strategy/init mode.
struct Networks {
    DenoiserFn denoiser;
    const NetworkParams* predictor = nullptr;
    const NetworkParams* upsampler = nullptr;
};

// Full reverse-chain inference from t_start down to 1. The intermediate noise
// comes from the configured strategy (never used at t = 1); the initial draw
// is always Gaussian from the seed. x0_truth is consumed only by the
// TheoreticalOptimal strategy. Deterministic given the seed.
Tensor infer(const Tensor& y_lr, const std::optional<Tensor>& x0_truth,
             const InferenceConfig& cfg, const Networks& nets, const DiffusionSchedule& sched);

struct Metrics {
    double psnr = 0.0;  // dB on the [0,1]-mapped range; +inf sentinel for MSE < 1e-12
    double ssim = 0.0;  // 7x7 Gaussian window, sigma 1.5, C1=0.01^2, C2=0.03^2
    double l1 = 0.0;
    double proxy = 0.0;  // edge-feature L1
};

Metrics compute_metrics(const Tensor& pred, const Tensor& target);

struct EvalRow {
    std::string config;
    double psnr = 0.0;
    double ssim = 0.0;
    double l1 = 0.0;
    double proxy = 0.0;
    double runtime_s = 0.0;  // mean seconds per image; reported, never persisted
};

// One row per noise strategy (random, approx-optimal, predicted, theoretical)
// at t_start = T with regression init, averaged over the test split and
// n_seeds noise seeds.
std::vector<EvalRow> compare_strategies(const Corpus& test, const Networks& nets,
                                        const DiffusionSchedule& sched, std::uint64_t seed,
                                        int n_seeds = 3);

// {bicubic, regression} x t_start in 1..T with the Predicted strategy.
std::vector<EvalRow> step_sweep(const Corpus& test, const Networks& nets,
                                const DiffusionSchedule& sched, std::uint64_t seed);

// Tab-separated table with a fixed header. Timing stays off the artifact so
// seeded reruns are byte-identical; runtimes go to the console instead.
void write_eval_table(const std::string& path, const std::vector<EvalRow>& rows);
std::string format_eval_table(const std::vector<EvalRow>& rows, bool with_runtime);

}  // namespace lpnsr
