#pragma once

#include <vector>

#include "lpnsr/tensor.hpp"

namespace lpnsr::ops {

inline constexpr float kLeakySlope = 0.2f;

// All operations are pure: inputs are never written, the result owns a fresh
// buffer. Passing a tape records the backward step when any input is tracked;
// tape == nullptr evaluates forward only.

// 3x3 cross-correlation, stride 1, zero padding 1.
// input [B,Cin,H,W], weight [Cout,Cin,3,3], bias [Cout] -> [B,Cout,H,W].
Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& weight, const Tensor& bias);

// Elementwise. add/sub broadcast when one operand is a scalar tensor.
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul_scalar(Tape* tape, const Tensor& x, float s);
// a*x + b*y with equal shapes.
Tensor add_scaled(Tape* tape, float a, const Tensor& x, float b, const Tensor& y);
Tensor leaky_relu(Tape* tape, const Tensor& x);

// Spatial resampling, factor in {2,4}.
Tensor nearest_up(Tape* tape, const Tensor& x, int factor);
Tensor avg_down(Tape* tape, const Tensor& x, int factor);

Tensor concat_channels(Tape* tape, const std::vector<Tensor>& parts);

// Mean absolute difference -> scalar tensor. Subgradient 0 at exact ties.
Tensor l1_loss(Tape* tape, const Tensor& pred, const Tensor& target);

// Separable Catmull-Rom (a = -0.5) resampling with edge clamping. Down uses
// the kernel stretched by the factor with weights renormalized to sum 1.
Tensor bicubic_up(Tape* tape, const Tensor& x, int factor);
Tensor bicubic_down(Tape* tape, const Tensor& x, int factor);

// Fixed Sobel-x / Sobel-y / Laplacian responses stacked per channel:
// [B,C,H,W] -> [B,3C,H,W]. Replicate padding: constant inputs map to zero.
Tensor edge_features(Tape* tape, const Tensor& x);

// Catmull-Rom kernel value, exposed for direct-evaluation oracles.
double bicubic_kernel(double x);

}  // namespace lpnsr::ops
