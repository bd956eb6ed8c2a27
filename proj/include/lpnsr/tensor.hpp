#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "lpnsr/errors.hpp"

namespace lpnsr {

class Tape;

// Dense row-major float32 tensor. Copies are shallow: they share the value
// buffer and the gradient slot. clone() makes a deep copy of the values.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<float> values);

    static Tensor scalar(float v);
    static Tensor full(std::vector<int> shape, float v);
    static Tensor zeros_like(const Tensor& t);

    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& shape() const { return shape_; }
    int dim(std::size_t i) const { return shape_[i]; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_ ? data_->size() : 0; }

    float* data() { return data_->data(); }
    const float* data() const { return data_->data(); }
    std::vector<float>& vec() { return *data_; }
    const std::vector<float>& vec() const { return *data_; }

    float item() const;

    // 4-D convenience accessors for [B,C,H,W] images.
    float& at(int b, int c, int y, int x);
    float at(int b, int c, int y, int x) const;

    Tensor clone() const;
    void fill(float v);

    // Gradient tracking. A leaf with requires_grad participates in backward
    // and accumulates into its slot; intermediate results become tracked
    // automatically when an op with a tracked input is recorded on a tape.
    void set_requires_grad(bool on);
    bool requires_grad() const { return requires_grad_; }
    bool tracked() const { return tracked_; }
    void zero_grad();
    // Copy of the accumulated gradient; zeros when no gradient reached it.
    std::vector<float> grad() const;
    double grad_norm() const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    friend class Tape;
    friend struct OpAccess;
    friend void backward(Tensor& root, Tape& tape);

    struct GradSlot {
        std::vector<float> g;
    };

    void ensure_slot();
    void accumulate(const float* g, std::size_t n);

    std::vector<int> shape_;
    std::shared_ptr<std::vector<float>> data_;
    std::shared_ptr<GradSlot> slot_;
    bool requires_grad_ = false;
    bool tracked_ = false;
};

// Ordered record of the differentiable operations of one forward pass.
// Confined to the thread that builds it. backward() replays the record in
// reverse, accumulating chain-rule gradients into tensor slots; forward value
// buffers are never written.
class Tape {
public:
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

    void run_reverse() {
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> steps_;
};

// Seeds d(root)/d(root) = 1 and propagates through the tape. Root must be a
// scalar (numel == 1) tracked tensor.
void backward(Tensor& root, Tape& tape);

std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace lpnsr
