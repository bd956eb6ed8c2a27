#pragma once

#include <vector>

#include "lpnsr/errors.hpp"

namespace lpnsr {

// Residual-shifting schedule. eta[0] = 0 by convention; eta[1..T] is the
// strictly increasing shifting sequence with eta[T] < 1. alpha(t) is the
// per-step increment eta[t] - eta[t-1]. Immutable after construction.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> eta;  // length T+1, eta[0] == 0
    double kappa = 0.0;

    double alpha(int t) const { return eta[t] - eta[t - 1]; }
    void check_step(int t) const {
        if (t < 1 || t > T) throw DomainError("step index out of range 1..T");
    }
    void check_index(int s) const {
        if (s < 0 || s > T) throw DomainError("state index out of range 0..T");
    }

    // Throws ConfigError when any structural invariant is violated.
    void validate() const;
};

// Geometric interpolation between eta_min and eta_max over T steps
// (for T == 1 the single entry is eta_max). Validates all invariants.
DiffusionSchedule build_schedule(int T, double eta_min, double eta_max, double kappa);

}  // namespace lpnsr
