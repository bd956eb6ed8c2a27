#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpnsr/adam.hpp"
#include "lpnsr/data.hpp"
#include "lpnsr/models.hpp"
#include "lpnsr/schedule.hpp"

namespace lpnsr {

inline constexpr int kDefaultWidth = 16;

struct TrainConfig {
    int iterations = 3000;
    int batch = 8;
    AdamConfig adam;           // lr 1e-3, betas (0.9, 0.999), wd 1e-4
    float lambda1 = 1.0f;      // L1 weight
    float lambda_l = 1.0f;     // perceptual-proxy weight
    float lambda_g = 0.1f;     // adversarial slot; contributes zero
    std::uint64_t seed = 0;
    int eval_every = 500;
    int checkpoint_every = 0;  // 0: final checkpoint only
    std::string diag_dir;      // when set, NaN aborts dump state here

    // Invoked at the checkpoint cadence (and never at iteration 0).
    std::function<void(int iter, const NetworkParams&)> snapshot;

    void validate() const;
};

struct TrainReportRow {
    int iter = 0;
    double train_loss = 0.0;
    double val_l1 = 0.0;
    double val_proxy = 0.0;
};

struct TrainReport {
    std::vector<TrainReportRow> rows;
    std::string checkpoint_path;  // filled by the caller after saving
    double wall_seconds = 0.0;
    double initial_val_metric = 0.0;  // phase metric before any step
    double final_val_metric = 0.0;    // phase metric after the last step
    double baseline_val_metric = 0.0; // identity (denoiser) / bicubic (upsampler)
    bool beat_baseline = false;
    // Gradient norms observed in the final iteration.
    std::vector<std::pair<std::string, double>> last_grad_norms_trained;
    std::vector<std::pair<std::string, double>> last_grad_norms_frozen;
};

// Rows as `iter<TAB>loss<TAB>val_l1` under a fixed header.
void write_train_report(const std::string& path, const TrainReport& report);

// lambda1 * L1 + lambda_l * edge-feature L1 + lambda_g * 0. Negative weights
// are configuration errors.
Tensor loss_total(Tape* tape, const Tensor& pred, const Tensor& target,
                  float lambda1, float lambda_l, float lambda_g);
// Forward-only value of the edge-feature term.
double perceptual_proxy(const Tensor& pred, const Tensor& target);

// Phase 1: x_t ~ marginal(x0, y0, t) with t uniform per iteration; minimize
// L1(f(x_t, y0, t), x0). The report's baseline is the identity predictor
// x0' = x_t on the validation set.
NetworkParams pretrain_denoiser(const Corpus& train, const Corpus& val,
                                const DiffusionSchedule& sched, const TrainConfig& cfg,
                                TrainReport* report = nullptr);

// Phase 2: minimize L1(upsampler(y_lr), x0). Baseline is plain bicubic;
// failure to beat it is flagged in the report, not thrown.
NetworkParams pretrain_upsampler(const Corpus& train, const Corpus& val,
                                 const TrainConfig& cfg, TrainReport* report = nullptr);

// Phase 3: end-to-end noise-predictor training through the full reverse
// chain with bicubic initialization; the denoiser stays frozen (its gradient
// norms are recorded and must be zero).
NetworkParams train_predictor(const Corpus& train, const Corpus& val,
                              const DiffusionSchedule& sched, const NetworkParams& denoiser,
                              const TrainConfig& cfg, TrainReport* report = nullptr);

// Validation helpers (deterministic given seed), shared with the harnesses.
struct DenoiserEval {
    double val_l1 = 0.0;
    double identity_l1 = 0.0;
    std::vector<double> per_t_val;       // index 0 -> t=1
    std::vector<double> per_t_identity;
};
DenoiserEval eval_denoiser(const NetworkParams& den, const Corpus& val,
                           const DiffusionSchedule& sched, std::uint64_t seed);

double eval_bicubic_l1(const Corpus& val);
double eval_upsampler_l1(const NetworkParams& up, const Corpus& val);

struct ChainEval {
    double loss = 0.0;   // loss_total under the given weights
    double l1 = 0.0;
    double proxy = 0.0;
};
// Full reverse chain from t = T with bicubic init (the training path):
// predictor noise at t >= 2, z = 0 at t = 1.
ChainEval eval_predictor_chain(const NetworkParams& den, const NetworkParams& pred,
                               const Corpus& val, const DiffusionSchedule& sched,
                               float lambda1, float lambda_l, float lambda_g,
                               std::uint64_t seed);

// Batch helpers.
Tensor stack_batch(const std::vector<const Tensor*>& parts);

}  // namespace lpnsr
