// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "core/config.hpp"
#include "core/content_encoder.hpp"
#include "core/image.hpp"
#include "core/nn.hpp"

namespace scriptgen {

// Renders fused character embeddings into a 32-px-tall word image, width
// 16 px per character. Pipeline: linear expansion of each token into an
// 8 x 2 x C0 grid block, two residual stages with 2x nearest upsampling
// (8x2K -> 16x4K -> 32x8K), one width-doubling transposed conv to
// 32 x 16K, and a tanh'd 1-channel projection. Padded tokens are zeroed
// before the reshape so ragged batches render cleanly.
class SynthesisHead {
public:
    SynthesisHead(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng);

    // fused: (K, B, d_model). Output: (B, 1, 32, 16*K) in [-1, 1].
    Tensor synthesize(const Tensor& fused, const std::vector<uint8_t>& valid) const;

    static constexpr int kGridH = 8;
    static constexpr int kColsPerToken = 2;
    static constexpr int kWidthPerToken = 16;

private:
    struct ResBlock {
        nn::Conv2d conv1, conv2;
        Tensor forward(const Tensor& x) const;
    };
    ResBlock make_res(nn::ParamRegistry& reg, const std::string& name, int64_t ch, Rng& rng);

    const ModelConfig& cfg_;
    nn::Linear expand_;
    ResBlock res0a_, res0b_;
    nn::Conv2d up1_;
    ResBlock res1a_, res1b_;
    nn::Conv2d up2_;
    ResBlock res2a_, res2b_;
    nn::ConvTranspose2d widen_;
    ResBlock res3a_, res3b_;
    nn::Conv2d to_gray_;
    int64_t c0_, c1_, c2_, c3_;
};

// Crops one batch item of a synthesized (B,1,32,16*Kmax) tensor to its
// true character count and converts to an 8-bit raster.
ImageU8 export_generated(const Tensor& batch_images, int64_t item, int64_t true_len);

} // namespace scriptgen
