#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lpnsr/tensor.hpp"

namespace lpnsr {

struct FiniteDiffReport {
    bool pass = true;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::string detail;
};

// Central differences (step 1e-3) against reverse-mode gradients of a scalar
// function of x. The callable must rebuild the graph on the given tape; it is
// evaluated at perturbed copies of x, so it must not capture x itself.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

FiniteDiffReport finite_diff_check(const ScalarFn& f, const Tensor& x,
                                   double tol_rel = 1e-2, double tol_abs = 1e-4);

// Variant for functions containing activation kinks. The callable appends
// every pre-activation value to *probe when non-null. Elements whose +/- h
// evaluations land on different sides of a kink (a pre-activation changes
// sign) are excluded from the comparison; the report counts them.
using ProbedScalarFn = std::function<Tensor(Tape&, const Tensor&, std::vector<float>* probe)>;

struct ProbedFiniteDiffReport : FiniteDiffReport {
    std::size_t skipped = 0;
};

ProbedFiniteDiffReport finite_diff_check_probed(const ProbedScalarFn& f, const Tensor& x,
                                                double tol_rel = 1e-2, double tol_abs = 1e-4);

// Moves every element of x at least `margin` away from the nearest kink value
// in `kinks` (typically {0} for leaky_relu inputs). Returns a nudged clone.
Tensor nudge_from_kinks(const Tensor& x, const std::vector<float>& kinks, float margin = 1e-3f);

}  // namespace lpnsr
