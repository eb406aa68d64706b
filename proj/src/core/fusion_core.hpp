// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/content_encoder.hpp"
#include "core/nn.hpp"
#include "core/style_encoder.hpp"

namespace scriptgen {

// Final-layer (or any layer's) cross-attention weights captured during a
// recorded forward pass: one (H, K, L) row-stochastic tensor per batch
// item.
struct AttentionRecord {
    Tensor weights; // (H, K, L)
    std::string word;
    std::vector<PatchProvenance> provenance;
};

// Per-forward-pass recording state. Concurrent recorded passes use
// separate instances.
class AttentionTrace {
public:
    bool enabled() const { return !layers_.empty(); }
    int num_layers() const { return static_cast<int>(layers_.size()); }
    // Cross-attention of a given decoder layer as (B, H, K, L).
    const Tensor& layer(int layer_index) const;
    const Tensor& final_layer() const;
    // Splits out one batch item of one layer.
    AttentionRecord record_for(int item, int layer_index, const std::string& word,
                               const std::vector<PatchProvenance>& provenance) const;

    void push(Tensor t) { layers_.push_back(std::move(t)); }
    void clear() { layers_.clear(); }

private:
    std::vector<Tensor> layers_;
};

// Transformer decoder fusing Style Memory into the Content Query:
// fusion_layers pre-norm layers, each with self-attention over the query,
// cross-attention with the memory as key/value, and a feed-forward block.
// Generation is parallel over characters: no causal mask.
class FusionCore {
public:
    FusionCore(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng);

    // trace != nullptr records every layer's cross-attention weights.
    // training enables dropout (requires rng).
    Tensor fuse(const ContentQuery& query, const StyleMemory& memory,
                AttentionTrace* trace = nullptr, bool training = false, Rng* rng = nullptr) const;

private:
    const ModelConfig& cfg_;
    struct Layer {
        nn::LayerNorm ln_self;
        nn::MultiheadAttention self_attn;
        nn::LayerNorm ln_cross;
        nn::MultiheadAttention cross_attn;
        nn::LayerNorm ln_ffn;
        nn::Linear fc1, fc2;
    };
    std::vector<Layer> layers_;
    nn::LayerNorm final_ln_;
};

} // namespace scriptgen
