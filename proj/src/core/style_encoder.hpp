// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/nn.hpp"

namespace scriptgen {

struct PatchProvenance {
    int image_index;
    int patch_row;
    int patch_col;
};

// Style Memory: projected, layer-normalized patch embeddings of the N
// reference images, concatenated to (style_len, B, d_model), plus a
// per-index provenance map used to project attention back onto patches.
struct StyleMemory {
    Tensor memory; // (S_len, B, d_model)
    std::vector<PatchProvenance> provenance;
};

// memory index -> (image, patch row, patch col) on the patch grid,
// row-major per image.
PatchProvenance patch_provenance(int64_t memory_index, const ModelConfig& cfg);
std::vector<PatchProvenance> patch_provenance_table(const ModelConfig& cfg);

// ViT backbone over the style images. Tokens = per-image patches plus a
// CLS token with learned position embeddings; pre-norm encoder blocks;
// the CLS row is dropped before the 512-d projection (Linear then
// LayerNorm) that forms the memory bank.
class StyleEncoder {
public:
    StyleEncoder(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng);

    // images: (S = B*N, 3, image_size, image_size), sets stacked so that
    // batch item b owns rows [b*N, (b+1)*N).
    StyleMemory encode(const Tensor& images, int64_t batch) const;

    // Convenience: stacks preprocessed style sets into the image tensor.
    static Tensor stack_style_sets(const std::vector<StyleSampleSet>& sets, const ModelConfig& cfg);

private:
    const ModelConfig& cfg_;
    nn::Linear patch_embed_;
    Tensor cls_token_; // (vit_embed)
    Tensor pos_embed_; // (1 + P, vit_embed)
    struct Block {
        nn::LayerNorm ln1;
        nn::MultiheadAttention attn;
        nn::LayerNorm ln2;
        nn::Linear fc1, fc2;
    };
    std::vector<Block> blocks_;
    nn::LayerNorm final_ln_;
    nn::Linear proj_;     // vit_embed -> d_model
    nn::LayerNorm proj_ln_;
};

} // namespace scriptgen
