// SPDX-License-Identifier: Apache-2.0
#include "core/nn.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace scriptgen {
namespace nn {

Tensor& ParamRegistry::add(const std::string& name, Tensor t) {
    if (params_.count(name)) throw StateError("parameter already registered: " + name);
    t.set_requires_grad(true);
    auto [it, ok] = params_.emplace(name, std::move(t));
    (void)ok;
    return it->second;
}

Tensor& ParamRegistry::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw StateError("unknown parameter: " + name);
    return it->second;
}

std::vector<Tensor> ParamRegistry::tensors() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(t);
    return out;
}

void ParamRegistry::zero_grad() {
    for (auto& [name, t] : params_) t.zero_grad();
}

void ParamRegistry::set_requires_grad(bool v) {
    for (auto& [name, t] : params_) t.set_requires_grad(v);
}

int64_t ParamRegistry::total_params() const {
    int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

Linear::Linear(ParamRegistry& reg, const std::string& name, int64_t in, int64_t out, Rng& rng,
               bool with_bias) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    weight = reg.add(name + ".weight", Tensor::rand_uniform({out, in}, rng, -bound, bound));
    if (with_bias) bias = reg.add(name + ".bias", Tensor::zeros({out}));
}

LayerNorm::LayerNorm(ParamRegistry& reg, const std::string& name, int64_t dim) {
    gamma = reg.add(name + ".gamma", Tensor::full({dim}, 1.0));
    beta = reg.add(name + ".beta", Tensor::zeros({dim}));
}

MultiheadAttention::MultiheadAttention(ParamRegistry& reg, const std::string& name, int64_t dim,
                                       int64_t heads, Rng& rng)
    : dim(dim), heads(heads) {
    if (dim % heads != 0) throw ShapeError("attention dim must be divisible by head count");
    wq = Linear(reg, name + ".wq", dim, dim, rng);
    wk = Linear(reg, name + ".wk", dim, dim, rng);
    wv = Linear(reg, name + ".wv", dim, dim, rng);
    wo = Linear(reg, name + ".wo", dim, dim, rng);
}

Tensor MultiheadAttention::forward(const Tensor& query, const Tensor& memory, Tensor* attn_out,
                                   const std::vector<uint8_t>* key_padding, double dropout_p,
                                   Rng* rng, bool training) const {
    if (query.dim(2) != dim || memory.dim(2) != dim)
        throw ShapeError("attention: feature dim mismatch, expected " + std::to_string(dim));
    const int64_t K = query.dim(0), B = query.dim(1), L = memory.dim(0);
    if (memory.dim(1) != B) throw ShapeError("attention: batch mismatch between query and memory");
    Tensor q = ops::split_heads(wq.forward(query), heads);   // (B*H, K, dh)
    Tensor k = ops::split_heads(wk.forward(memory), heads);  // (B*H, L, dh)
    Tensor v = ops::split_heads(wv.forward(memory), heads);
    // One 1/sqrt(model dim) division of the logits, applied exactly once.
    Tensor scores = ops::scale(ops::bmm(q, k, /*trans_b=*/true),
                               1.0 / std::sqrt(static_cast<double>(dim)));
    if (key_padding) {
        if (static_cast<int64_t>(key_padding->size()) != B * L)
            throw ShapeError("attention: key padding mask must be B*L");
        // Padded keys get a large negative logit; softmax sends them to ~0.
        auto& sd = scores.data();
        for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < heads; ++h)
                for (int64_t kq = 0; kq < K; ++kq)
                    for (int64_t l = 0; l < L; ++l)
                        if ((*key_padding)[static_cast<size_t>(b * L + l)])
                            sd[static_cast<size_t>(((b * heads + h) * K + kq) * L + l)] = -1e30;
    }
    Tensor attn = ops::softmax_lastdim(scores); // (B*H, K, L)
    if (attn_out) {
        Tensor a = attn.detach();
        *attn_out = Tensor::from_data({B, heads, K, L}, a.data());
    }
    Tensor attn_used = attn;
    if (dropout_p > 0.0 && training && rng) attn_used = ops::dropout(attn, dropout_p, *rng, true);
    Tensor ctx = ops::bmm(attn_used, v); // (B*H, K, dh)
    return wo.forward(ops::merge_heads(ctx, heads));
}

Conv2d::Conv2d(ParamRegistry& reg, const std::string& name, int64_t ci_, int64_t co_, int kh_,
               int kw_, int sh_, int sw_, int ph_, int pw_, Rng& rng)
    : ci(ci_), co(co_), kh(kh_), kw(kw_), sh(sh_), sw(sw_), ph(ph_), pw(pw_) {
    const double bound = std::sqrt(1.0 / static_cast<double>(ci * kh * kw));
    weight = reg.add(name + ".weight",
                     Tensor::rand_uniform({co, ci * kh * kw}, rng, -bound, bound));
    bias = reg.add(name + ".bias", Tensor::zeros({co}));
}

ConvTranspose2d::ConvTranspose2d(ParamRegistry& reg, const std::string& name, int64_t ci_,
                                 int64_t co_, int kh_, int kw_, int sh_, int sw_, int ph_, int pw_,
                                 Rng& rng)
    : ci(ci_), co(co_), kh(kh_), kw(kw_), sh(sh_), sw(sw_), ph(ph_), pw(pw_) {
    const double bound = std::sqrt(1.0 / static_cast<double>(ci * kh * kw));
    weight = reg.add(name + ".weight",
                     Tensor::rand_uniform({ci, co * kh * kw}, rng, -bound, bound));
    bias = reg.add(name + ".bias", Tensor::zeros({co}));
}

BiRnn::BiRnn(ParamRegistry& reg, const std::string& name, int64_t input, int64_t hidden_, Rng& rng)
    : hidden(hidden_) {
    fwd_in = Linear(reg, name + ".fwd_in", input, hidden, rng);
    fwd_rec = Linear(reg, name + ".fwd_rec", hidden, hidden, rng, /*with_bias=*/false);
    bwd_in = Linear(reg, name + ".bwd_in", input, hidden, rng);
    bwd_rec = Linear(reg, name + ".bwd_rec", hidden, hidden, rng, /*with_bias=*/false);
}

Tensor BiRnn::forward(const Tensor& x) const {
    if (x.ndim() != 3) throw ShapeError("birnn: expected (T,B,C)");
    const int64_t T = x.dim(0), B = x.dim(1);
    std::vector<Tensor> fwd(T), bwd(T);
    Tensor hf = Tensor::zeros({B, hidden});
    for (int64_t t = 0; t < T; ++t) {
        Tensor xt = ops::index_dim0(x, t);
        hf = ops::tanh_op(ops::add(fwd_in.forward(xt), fwd_rec.forward(hf)));
        fwd[static_cast<size_t>(t)] = ops::reshape(hf, {1, B, hidden});
    }
    Tensor hb = Tensor::zeros({B, hidden});
    for (int64_t t = T - 1; t >= 0; --t) {
        Tensor xt = ops::index_dim0(x, t);
        hb = ops::tanh_op(ops::add(bwd_in.forward(xt), bwd_rec.forward(hb)));
        bwd[static_cast<size_t>(t)] = ops::reshape(hb, {1, B, hidden});
    }
    Tensor f = ops::concat_dim0(fwd); // (T,B,h)
    Tensor b = ops::concat_dim0(bwd); // (T,B,h)
    return ops::concat_lastdim(f, b); // (T,B,2h)
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
        v_[i].assign(static_cast<size_t>(params_[i].numel()), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.has_grad()) continue;
        auto& data = p.data();
        const auto& g = p.grad();
        for (size_t j = 0; j < data.size(); ++j) {
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

double Adam::max_grad_abs() const {
    double mx = 0.0;
    for (const auto& p : params_)
        if (p.has_grad())
            for (double g : p.grad()) mx = std::max(mx, std::abs(g));
    return mx;
}

void Adam::clip_grad_norm(double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& p : params_)
        if (p.has_grad())
            for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double f = max_norm / norm;
    for (auto& p : params_)
        if (p.has_grad())
            for (double& g : p.grad_mutable()) g *= f;
}

} // namespace nn
} // namespace scriptgen
