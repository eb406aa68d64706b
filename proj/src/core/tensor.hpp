// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace scriptgen {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

struct TensorImpl;
class Tensor;

// Reverse-mode autograd over dense double-precision tensors.
//
// Tensors are handles to shared storage plus an optional graph node. Ops
// (see ops.hpp) attach a backward closure when any input participates in
// gradient computation and graph recording is enabled.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from_data(Shape shape, std::vector<double> data);
    static Tensor scalar(double value);
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, double mean = 0.0);
    static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int ndim() const;
    int64_t dim(int i) const;
    int64_t numel() const;

    // Handle semantics: a Tensor is a shared reference to its storage, so
    // accessors are const while the payload stays mutable (needed by
    // backward closures that capture handles by value).
    std::vector<double>& data() const;
    double& at(int64_t i) const;

    // Scalar accessor; throws unless numel() == 1.
    double value() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool v);
    // True when this node participates in the graph (leaf param or interior).
    bool needs_grad() const;

    const std::vector<double>& grad() const;
    std::vector<double>& grad_mutable() const;
    bool has_grad() const;
    void zero_grad() const;

    // Run reverse-mode accumulation from this scalar tensor.
    void backward();

    // Value-only copy, detached from the graph.
    Tensor detach() const;

    bool all_finite() const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad; // lazily sized to numel, zero-filled
    bool requires_grad{false};
    // Set on interior nodes; propagates this->grad into parents' grads.
    std::function<void(TensorImpl&)> backward_fn;
    std::vector<Tensor> parents;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    void ensure_grad();
    bool needs_grad() const { return requires_grad || static_cast<bool>(backward_fn); }
};

// RAII guard disabling graph recording (inference / detached forwards).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

} // namespace scriptgen
