#pragma once

#include "lpnsr/ops.hpp"
#include "lpnsr/schedule.hpp"
#include "lpnsr/tensor.hpp"

namespace lpnsr {

// Mean and standard deviation of one reverse transition. std is a scalar
// (isotropic); it is exactly 0 at t = 1.
struct ReverseMoments {
    Tensor mean;
    double std = 0.0;
};

enum class NoiseStrategy {
    RandomGaussian,
    Predicted,
    ApproximateOptimal,
    TheoreticalOptimal,
    Zero,
};

const char* noise_strategy_name(NoiseStrategy s);
NoiseStrategy noise_strategy_from_name(const std::string& name);

// All functions are pure maps over tensors given a schedule. Noise is always
// an explicit argument; nothing below draws random numbers. Every function
// accepts an optional tape so the whole chain is differentiable.

// One forward Markov step: x_prev + alpha_t * e0 + kappa * sqrt(alpha_t) * eps.
Tensor forward_transition(Tape* tape, const Tensor& x_prev, const Tensor& e0, int t,
                          const DiffusionSchedule& sched, const Tensor& eps);

// Closed-form marginal: (1 - eta_t) * x0 + eta_t * y0 + kappa * sqrt(eta_t) * eps.
Tensor forward_marginal(Tape* tape, const Tensor& x0, const Tensor& y0, int t,
                        const DiffusionSchedule& sched, const Tensor& eps);

// Sampling start state: y0_up + kappa * sqrt(eta_{t_start}) * z.
Tensor init_state(Tape* tape, const Tensor& y0_up, int t_start,
                  const DiffusionSchedule& sched, const Tensor& z);

// mean = (eta_{t-1}/eta_t) * x_t + (alpha_t/eta_t) * x0_pred,
// std  = kappa * sqrt((eta_{t-1}/eta_t) * alpha_t). At t = 1 the mean is
// x0_pred exactly and std is 0.
ReverseMoments reverse_moments(Tape* tape, const Tensor& x_t, const Tensor& x0_pred, int t,
                               const DiffusionSchedule& sched);

// mean + std * z. Rejects nonzero z at t = 1 (the last step is deterministic).
Tensor reverse_step(Tape* tape, const Tensor& x_t, const Tensor& x0_pred, int t,
                    const DiffusionSchedule& sched, const Tensor& z);
Tensor reverse_step_from_moments(Tape* tape, const ReverseMoments& m, int t,
                                 const DiffusionSchedule& sched, const Tensor& z);

// Noise that maximizes the likelihood of x0 for the step producing x_{t-1}:
// ((1 - eta_{t-1}) * x0 + eta_{t-1} * y0 - mean) / std. Domain error at t = 1
// (std = 0; callers must use z = 0 there).
Tensor optimal_noise(Tape* tape, const Tensor& x0, const Tensor& y0, const ReverseMoments& m,
                     int t, const DiffusionSchedule& sched);

// (1 - eta_s) * x0 + eta_s * y0 for s in 0..T; the noiseless trajectory.
Tensor deterministic_state(Tape* tape, const Tensor& x0, const Tensor& y0, int s,
                           const DiffusionSchedule& sched);

// Likelihood-inversion of the marginal at step t under a flat prior:
// mean = (x_t - eta_t * y0) / (1 - eta_t), var = kappa^2 * eta_t / (1 - eta_t)^2.
struct PosteriorParams {
    Tensor mean;
    double var = 0.0;
};
PosteriorParams posterior_params(Tape* tape, const Tensor& x_t, const Tensor& y0, int t,
                                 const DiffusionSchedule& sched);

}  // namespace lpnsr
