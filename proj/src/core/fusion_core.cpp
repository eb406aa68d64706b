// SPDX-License-Identifier: Apache-2.0
#include "core/fusion_core.hpp"

#include "core/errors.hpp"

namespace scriptgen {

const Tensor& AttentionTrace::layer(int layer_index) const {
    if (layers_.empty()) throw StateError("attention trace: recording was not enabled");
    if (layer_index < 0 || layer_index >= num_layers())
        throw ValueError("attention trace: layer index " + std::to_string(layer_index) +
                         " out of range [0, " + std::to_string(num_layers()) + ")");
    return layers_[static_cast<size_t>(layer_index)];
}

const Tensor& AttentionTrace::final_layer() const { return layer(num_layers() - 1); }

AttentionRecord AttentionTrace::record_for(int item, int layer_index, const std::string& word,
                                           const std::vector<PatchProvenance>& provenance) const {
    const Tensor& t = layer(layer_index); // (B, H, K, L)
    const int64_t B = t.dim(0), H = t.dim(1), K = t.dim(2), L = t.dim(3);
    if (item < 0 || item >= B) throw ValueError("attention trace: batch item out of range");
    Tensor w = Tensor::zeros({H, K, L});
    std::copy_n(t.data().data() + static_cast<int64_t>(item) * H * K * L, H * K * L,
                w.data().data());
    return {std::move(w), word, provenance};
}

FusionCore::FusionCore(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng) : cfg_(cfg) {
    const int64_t D = cfg.d_model;
    layers_.reserve(static_cast<size_t>(cfg.fusion_layers));
    for (int i = 0; i < cfg.fusion_layers; ++i) {
        const std::string base = "fusion_core.layer" + std::to_string(i);
        Layer l;
        l.ln_self = nn::LayerNorm(reg, base + ".ln_self", D);
        l.self_attn = nn::MultiheadAttention(reg, base + ".self_attn", D, cfg.fusion_heads, rng);
        l.ln_cross = nn::LayerNorm(reg, base + ".ln_cross", D);
        l.cross_attn = nn::MultiheadAttention(reg, base + ".cross_attn", D, cfg.fusion_heads, rng);
        l.ln_ffn = nn::LayerNorm(reg, base + ".ln_ffn", D);
        l.fc1 = nn::Linear(reg, base + ".fc1", D, cfg.fusion_ffn, rng);
        l.fc2 = nn::Linear(reg, base + ".fc2", cfg.fusion_ffn, D, rng);
        layers_.push_back(std::move(l));
    }
    final_ln_ = nn::LayerNorm(reg, "fusion_core.final_ln", D);
}

Tensor FusionCore::fuse(const ContentQuery& query, const StyleMemory& memory,
                        AttentionTrace* trace, bool training, Rng* rng) const {
    const Tensor& q = query.query;
    const Tensor& mem = memory.memory;
    if (q.ndim() != 3 || mem.ndim() != 3)
        throw ShapeError("fuse: query and memory must be 3-D");
    if (q.dim(2) != cfg_.d_model || mem.dim(2) != cfg_.d_model)
        throw ShapeError("fuse: feature dim mismatch, expected d_model=" +
                         std::to_string(cfg_.d_model) + ", got query " + shape_str(q.shape()) +
                         " memory " + shape_str(mem.shape()));
    if (q.dim(1) != mem.dim(1)) throw ShapeError("fuse: batch mismatch");
    const int64_t K = q.dim(0), B = q.dim(1);
    const double p = training ? cfg_.fusion_dropout : 0.0;
    // Padded query positions must not leak into real ones through
    // self-attention, so they are masked out on the key side.
    std::vector<uint8_t> self_key_padding(static_cast<size_t>(B * K), 0);
    bool any_padding = false;
    for (int64_t b = 0; b < B; ++b)
        for (int64_t k = 0; k < K; ++k)
            if (!query.valid[static_cast<size_t>(k * B + b)]) {
                self_key_padding[static_cast<size_t>(b * K + k)] = 1;
                any_padding = true;
            }
    const std::vector<uint8_t>* self_mask = any_padding ? &self_key_padding : nullptr;
    if (trace) trace->clear();
    Tensor x = q;
    for (const Layer& l : layers_) {
        Tensor h = l.ln_self.forward(x);
        Tensor sa = l.self_attn.forward(h, h, nullptr, self_mask, p, rng, training);
        x = ops::add(x, training && p > 0 ? ops::dropout(sa, p, *rng, true) : sa);
        Tensor c = l.ln_cross.forward(x);
        Tensor attn;
        Tensor ca = l.cross_attn.forward(c, mem, trace ? &attn : nullptr, nullptr, p, rng, training);
        if (trace) trace->push(std::move(attn));
        x = ops::add(x, training && p > 0 ? ops::dropout(ca, p, *rng, true) : ca);
        Tensor f = l.ln_ffn.forward(x);
        Tensor ff = l.fc2.forward(ops::gelu(l.fc1.forward(f)));
        x = ops::add(x, training && p > 0 ? ops::dropout(ff, p, *rng, true) : ff);
    }
    return final_ln_.forward(x);
}

} // namespace scriptgen
