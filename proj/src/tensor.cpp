#include "lpnsr/tensor.hpp"

#include <cmath>
#include <string>

namespace lpnsr {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor dimension must be positive, got " + std::to_string(d));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<float>>(shape_numel(shape_), 0.0f)) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> values) : shape_(std::move(shape)) {
    if (values.size() != shape_numel(shape_))
        throw DimensionError("value count does not match shape");
    data_ = std::make_shared<std::vector<float>>(std::move(values));
}

Tensor Tensor::scalar(float v) {
    return Tensor({1}, {v});
}

Tensor Tensor::full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::zeros_like(const Tensor& t) {
    return Tensor(t.shape_);
}

float Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() requires a scalar tensor");
    return (*data_)[0];
}

float& Tensor::at(int b, int c, int y, int x) {
    const int C = shape_[1], H = shape_[2], W = shape_[3];
    return (*data_)[static_cast<std::size_t>(((b * C + c) * H + y) * W + x)];
}

float Tensor::at(int b, int c, int y, int x) const {
    const int C = shape_[1], H = shape_[2], W = shape_[3];
    return (*data_)[static_cast<std::size_t>(((b * C + c) * H + y) * W + x)];
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
}

void Tensor::fill(float v) {
    for (auto& x : *data_) x = v;
}

void Tensor::set_requires_grad(bool on) {
    requires_grad_ = on;
    tracked_ = on;
    if (on) {
        ensure_slot();
    } else {
        slot_.reset();
    }
}

void Tensor::ensure_slot() {
    if (!slot_) slot_ = std::make_shared<GradSlot>();
    if (slot_->g.size() != numel()) slot_->g.assign(numel(), 0.0f);
}

void Tensor::zero_grad() {
    if (slot_) slot_->g.assign(numel(), 0.0f);
}

void Tensor::accumulate(const float* g, std::size_t n) {
    ensure_slot();
    float* dst = slot_->g.data();
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

std::vector<float> Tensor::grad() const {
    if (!slot_ || slot_->g.size() != numel()) return std::vector<float>(numel(), 0.0f);
    return slot_->g;
}

double Tensor::grad_norm() const {
    if (!slot_) return 0.0;
    double s = 0.0;
    for (float v : slot_->g) s += static_cast<double>(v) * v;
    return std::sqrt(s);
}

bool Tensor::all_finite() const {
    for (float v : *data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void backward(Tensor& root, Tape& tape) {
    if (root.numel() != 1) throw DimensionError("backward requires a scalar root");
    if (!root.tracked()) return;  // nothing on the tape depends on a leaf
    root.ensure_slot();
    root.slot_->g[0] += 1.0f;
    tape.run_reverse();
}

}  // namespace lpnsr
