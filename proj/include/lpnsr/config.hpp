#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpnsr/data.hpp"
#include "lpnsr/schedule.hpp"
#include "lpnsr/training.hpp"

namespace lpnsr {

// Merged view of defaults <- config file <- flag overrides. Every key is
// validated up front; unknown keys are hard errors.
struct RunConfig {
    int schedule_T = 4;
    double eta_min = 0.001;
    double eta_max = 0.999;
    double kappa = 2.0;

    CorpusConfig corpus;

    int denoiser_iters = 5000;
    int upsampler_iters = 3000;
    int predictor_iters = 3000;
    int batch = 8;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-4;
    int eval_every = 500;
    int checkpoint_every = 0;

    double lambda1 = 1.0;
    double lambda_l = 1.0;
    double lambda_g = 0.1;

    int infer_steps = 4;
    std::string infer_init = "regression";
    std::string infer_strategy = "predicted";
    int eval_seeds = 3;

    std::uint64_t seed = 0;

    DiffusionSchedule make_schedule() const;
    TrainConfig train_config(int iterations, const std::string& diag_dir) const;
    void validate() const;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// path may be empty (defaults only). File format: `key = value` lines with
// `#` comments. Overrides are applied after the file.
RunConfig load_config(const std::string& path, const Overrides& overrides);

// Every accepted key with its default, one per line (drives --help).
std::string config_key_reference();

// Effective-config echo for provenance, deterministic ordering.
std::string render_config(const RunConfig& cfg);

}  // namespace lpnsr
