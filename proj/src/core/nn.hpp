// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/ops.hpp"
#include "core/tensor.hpp"

namespace scriptgen {
namespace nn {

// Named parameter registry. Modules register their parameters under
// hierarchical dotted names; the checkpoint container serializes exactly
// this map.
class ParamRegistry {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const std::map<std::string, Tensor>& all() const { return params_; }
    std::vector<Tensor> tensors() const;
    void zero_grad();
    void set_requires_grad(bool v);
    int64_t total_params() const;

private:
    std::map<std::string, Tensor> params_;
};

struct Linear {
    Tensor weight; // (out, in)
    Tensor bias;   // (out), undefined when bias-free
    Linear() = default;
    Linear(ParamRegistry& reg, const std::string& name, int64_t in, int64_t out, Rng& rng,
           bool with_bias = true);
    Tensor forward(const Tensor& x) const { return ops::linear(x, weight, bias); }
};

struct LayerNorm {
    Tensor gamma, beta;
    double eps{1e-5};
    LayerNorm() = default;
    LayerNorm(ParamRegistry& reg, const std::string& name, int64_t dim);
    Tensor forward(const Tensor& x) const { return ops::layer_norm(x, gamma, beta, eps); }
};

// Multi-head attention. Queries are (K,B,D); keys/values come from a
// (L,B,D) memory (pass the query again for self-attention). The logit
// scale divides by sqrt(model dim) once, before softmax.
struct MultiheadAttention {
    int64_t dim{0};
    int64_t heads{0};
    Linear wq, wk, wv, wo;
    MultiheadAttention() = default;
    MultiheadAttention(ParamRegistry& reg, const std::string& name, int64_t dim, int64_t heads,
                       Rng& rng);
    // attn_out: when non-null, receives the post-softmax weights shaped
    // (B, H, K, L), detached from the graph.
    Tensor forward(const Tensor& query, const Tensor& memory, Tensor* attn_out = nullptr,
                   const std::vector<uint8_t>* key_padding = nullptr, double dropout_p = 0.0,
                   Rng* rng = nullptr, bool training = false) const;
};

struct Conv2d {
    Tensor weight; // (co, ci*kh*kw)
    Tensor bias;
    int64_t ci{0}, co{0};
    int kh{0}, kw{0}, sh{1}, sw{1}, ph{0}, pw{0};
    Conv2d() = default;
    Conv2d(ParamRegistry& reg, const std::string& name, int64_t ci, int64_t co, int kh, int kw,
           int sh, int sw, int ph, int pw, Rng& rng);
    Tensor forward(const Tensor& x) const {
        return ops::conv2d(x, weight, bias, ci, co, kh, kw, sh, sw, ph, pw);
    }
};

struct ConvTranspose2d {
    Tensor weight; // (ci, co*kh*kw)
    Tensor bias;
    int64_t ci{0}, co{0};
    int kh{0}, kw{0}, sh{1}, sw{1}, ph{0}, pw{0};
    ConvTranspose2d() = default;
    ConvTranspose2d(ParamRegistry& reg, const std::string& name, int64_t ci, int64_t co, int kh,
                    int kw, int sh, int sw, int ph, int pw, Rng& rng);
    Tensor forward(const Tensor& x) const {
        return ops::conv_transpose2d(x, weight, bias, ci, co, kh, kw, sh, sw, ph, pw);
    }
};

// Single-layer bidirectional tanh RNN over (T,B,C) frames -> (T,B,2*hidden).
struct BiRnn {
    int64_t hidden{0};
    Linear fwd_in, fwd_rec, bwd_in, bwd_rec;
    BiRnn() = default;
    BiRnn(ParamRegistry& reg, const std::string& name, int64_t input, int64_t hidden, Rng& rng);
    Tensor forward(const Tensor& x) const;
};

// Adam with per-parameter moment buffers, introspectable for tests and
// serialized into checkpoints.
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps = 1e-8);
    void step();
    void zero_grad();
    double lr() const { return lr_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }
    int64_t step_count() const { return t_; }
    // Serialization hooks (trainer checkpointing).
    std::vector<std::vector<double>>& moments_m() { return m_; }
    std::vector<std::vector<double>>& moments_v() { return v_; }
    void set_step_count(int64_t t) { t_ = t; }
    double max_grad_abs() const;
    void clip_grad_norm(double max_norm);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_{0}, beta1_{0}, beta2_{0}, eps_{1e-8};
    int64_t t_{0};
};

} // namespace nn
} // namespace scriptgen
