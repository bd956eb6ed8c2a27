#include "lpnsr/diffusion.hpp"

#include <cmath>
#include <string>

namespace lpnsr {

const char* noise_strategy_name(NoiseStrategy s) {
    switch (s) {
        case NoiseStrategy::RandomGaussian: return "random_gaussian";
        case NoiseStrategy::Predicted: return "predicted";
        case NoiseStrategy::ApproximateOptimal: return "approx_optimal";
        case NoiseStrategy::TheoreticalOptimal: return "theoretical_optimal";
        case NoiseStrategy::Zero: return "zero";
    }
    return "?";
}

NoiseStrategy noise_strategy_from_name(const std::string& name) {
    if (name == "random_gaussian") return NoiseStrategy::RandomGaussian;
    if (name == "predicted") return NoiseStrategy::Predicted;
    if (name == "approx_optimal") return NoiseStrategy::ApproximateOptimal;
    if (name == "theoretical_optimal") return NoiseStrategy::TheoreticalOptimal;
    if (name == "zero") return NoiseStrategy::Zero;
    throw ConfigError("unknown noise strategy '" + name + "'");
}

Tensor forward_transition(Tape* tape, const Tensor& x_prev, const Tensor& e0, int t,
                          const DiffusionSchedule& sched, const Tensor& eps) {
    sched.check_step(t);
    const double a = sched.alpha(t);
    Tensor shifted = ops::add_scaled(tape, 1.0f, x_prev, static_cast<float>(a), e0);
    return ops::add_scaled(tape, 1.0f, shifted, static_cast<float>(sched.kappa * std::sqrt(a)), eps);
}

Tensor forward_marginal(Tape* tape, const Tensor& x0, const Tensor& y0, int t,
                        const DiffusionSchedule& sched, const Tensor& eps) {
    sched.check_step(t);
    const double eta = sched.eta[t];
    Tensor blend = ops::add_scaled(tape, static_cast<float>(1.0 - eta), x0, static_cast<float>(eta), y0);
    return ops::add_scaled(tape, 1.0f, blend, static_cast<float>(sched.kappa * std::sqrt(eta)), eps);
}

Tensor init_state(Tape* tape, const Tensor& y0_up, int t_start,
                  const DiffusionSchedule& sched, const Tensor& z) {
    sched.check_step(t_start);
    const double s = sched.kappa * std::sqrt(sched.eta[t_start]);
    return ops::add_scaled(tape, 1.0f, y0_up, static_cast<float>(s), z);
}

ReverseMoments reverse_moments(Tape* tape, const Tensor& x_t, const Tensor& x0_pred, int t,
                               const DiffusionSchedule& sched) {
    sched.check_step(t);
    const double eta_t = sched.eta[t];
    const double eta_prev = sched.eta[t - 1];
    const double a = sched.alpha(t);
    ReverseMoments m;
    m.mean = ops::add_scaled(tape, static_cast<float>(eta_prev / eta_t), x_t,
                             static_cast<float>(a / eta_t), x0_pred);
    m.std = sched.kappa * std::sqrt((eta_prev / eta_t) * a);
    return m;
}

Tensor reverse_step_from_moments(Tape* tape, const ReverseMoments& m, int t,
                                 const DiffusionSchedule& sched, const Tensor& z) {
    sched.check_step(t);
    if (t == 1) {
        for (std::size_t i = 0; i < z.numel(); ++i)
            if (z.data()[i] != 0.0f)
                throw DomainError("reverse_step: noise must be zero at t=1 (z_0 = 0)");
        return m.mean;
    }
    return ops::add_scaled(tape, 1.0f, m.mean, static_cast<float>(m.std), z);
}

Tensor reverse_step(Tape* tape, const Tensor& x_t, const Tensor& x0_pred, int t,
                    const DiffusionSchedule& sched, const Tensor& z) {
    return reverse_step_from_moments(tape, reverse_moments(tape, x_t, x0_pred, t, sched), t, sched, z);
}

Tensor optimal_noise(Tape* tape, const Tensor& x0, const Tensor& y0, const ReverseMoments& m,
                     int t, const DiffusionSchedule& sched) {
    sched.check_step(t);
    if (t == 1)
        throw DomainError("optimal_noise: undefined at t=1 (std=0); use z=0 for the final step");
    const double eta_prev = sched.eta[t - 1];
    Tensor target = ops::add_scaled(tape, static_cast<float>(1.0 - eta_prev), x0,
                                    static_cast<float>(eta_prev), y0);
    Tensor diff = ops::sub(tape, target, m.mean);
    return ops::mul_scalar(tape, diff, static_cast<float>(1.0 / m.std));
}

Tensor deterministic_state(Tape* tape, const Tensor& x0, const Tensor& y0, int s,
                           const DiffusionSchedule& sched) {
    sched.check_index(s);
    const double eta = sched.eta[s];
    return ops::add_scaled(tape, static_cast<float>(1.0 - eta), x0, static_cast<float>(eta), y0);
}

PosteriorParams posterior_params(Tape* tape, const Tensor& x_t, const Tensor& y0, int t,
                                 const DiffusionSchedule& sched) {
    sched.check_step(t);
    const double eta = sched.eta[t];
    if (eta >= 1.0) throw DomainError("posterior_params: eta_t must be < 1");
    PosteriorParams p;
    p.mean = ops::add_scaled(tape, static_cast<float>(1.0 / (1.0 - eta)), x_t,
                             static_cast<float>(-eta / (1.0 - eta)), y0);
    p.var = sched.kappa * sched.kappa * eta / ((1.0 - eta) * (1.0 - eta));
    return p;
}

}  // namespace lpnsr
