// SPDX-License-Identifier: Apache-2.0
#include "core/synthesis_head.hpp"

#include "core/errors.hpp"
#include "core/image.hpp"

namespace scriptgen {

namespace {

// (K, B, gridH*cols*C) -> (B, C, gridH, cols*K): token k fills columns
// [cols*k, cols*(k+1)); the per-token block is laid out (c, i, j).
Tensor tokens_to_grid(const Tensor& x, int64_t gh, int64_t cols, int64_t C) {
    const int64_t K = x.dim(0), B = x.dim(1);
    const int64_t W = cols * K;
    std::vector<double> out(static_cast<size_t>(B * C * gh * W));
    for (int64_t k = 0; k < K; ++k)
        for (int64_t b = 0; b < B; ++b) {
            const double* src = x.data().data() + (k * B + b) * (gh * cols * C);
            for (int64_t c = 0; c < C; ++c)
                for (int64_t i = 0; i < gh; ++i)
                    for (int64_t j = 0; j < cols; ++j)
                        out[static_cast<size_t>(((b * C + c) * gh + i) * W + k * cols + j)] =
                            src[(c * gh + i) * cols + j];
        }
    return ops::make_op_node(
        {B, C, gh, W}, std::move(out), {x}, [x, K, B, C, gh, cols, W](TensorImpl& self) mutable {
            if (!x.needs_grad()) return;
            auto& dst = x.grad_mutable();
            for (int64_t k = 0; k < K; ++k)
                for (int64_t b = 0; b < B; ++b) {
                    double* d = dst.data() + (k * B + b) * (gh * cols * C);
                    for (int64_t c = 0; c < C; ++c)
                        for (int64_t i = 0; i < gh; ++i)
                            for (int64_t j = 0; j < cols; ++j)
                                d[(c * gh + i) * cols + j] += self.grad[static_cast<size_t>(
                                    ((b * C + c) * gh + i) * W + k * cols + j)];
                }
        });
}

} // namespace

Tensor SynthesisHead::ResBlock::forward(const Tensor& x) const {
    Tensor h = conv1.forward(ops::relu(x));
    h = conv2.forward(ops::relu(h));
    return ops::add(x, h);
}

SynthesisHead::ResBlock SynthesisHead::make_res(nn::ParamRegistry& reg, const std::string& name,
                                                int64_t ch, Rng& rng) {
    ResBlock r;
    r.conv1 = nn::Conv2d(reg, name + ".conv1", ch, ch, 3, 3, 1, 1, 1, 1, rng);
    r.conv2 = nn::Conv2d(reg, name + ".conv2", ch, ch, 3, 3, 1, 1, 1, 1, rng);
    return r;
}

SynthesisHead::SynthesisHead(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng) : cfg_(cfg) {
    c0_ = cfg.synth_base_channels;
    c1_ = std::max<int64_t>(8, c0_ / 2);
    c2_ = std::max<int64_t>(8, c0_ / 4);
    c3_ = std::max<int64_t>(8, c0_ / 8);
    expand_ = nn::Linear(reg, "synthesis_head.expand", cfg.d_model,
                         kGridH * kColsPerToken * c0_, rng);
    res0a_ = make_res(reg, "synthesis_head.res0a", c0_, rng);
    res0b_ = make_res(reg, "synthesis_head.res0b", c0_, rng);
    up1_ = nn::Conv2d(reg, "synthesis_head.up1", c0_, c1_, 3, 3, 1, 1, 1, 1, rng);
    res1a_ = make_res(reg, "synthesis_head.res1a", c1_, rng);
    res1b_ = make_res(reg, "synthesis_head.res1b", c1_, rng);
    up2_ = nn::Conv2d(reg, "synthesis_head.up2", c1_, c2_, 3, 3, 1, 1, 1, 1, rng);
    res2a_ = make_res(reg, "synthesis_head.res2a", c2_, rng);
    res2b_ = make_res(reg, "synthesis_head.res2b", c2_, rng);
    widen_ = nn::ConvTranspose2d(reg, "synthesis_head.widen", c2_, c3_, 1, 4, 1, 2, 0, 1, rng);
    res3a_ = make_res(reg, "synthesis_head.res3a", c3_, rng);
    res3b_ = make_res(reg, "synthesis_head.res3b", c3_, rng);
    to_gray_ = nn::Conv2d(reg, "synthesis_head.to_gray", c3_, 1, 3, 3, 1, 1, 1, 1, rng);
}

Tensor SynthesisHead::synthesize(const Tensor& fused, const std::vector<uint8_t>& valid) const {
    if (fused.ndim() != 3 || fused.dim(2) != cfg_.d_model)
        throw ShapeError("synthesize: expected (K,B,d_model) input");
    const int64_t K = fused.dim(0), B = fused.dim(1);
    if (K < 1) throw ValueError("synthesize: need K >= 1 tokens");
    if (!fused.all_finite()) throw ValueError("synthesize: non-finite values in fused sequence");
    if (static_cast<int64_t>(valid.size()) != K * B)
        throw ShapeError("synthesize: validity mask must be K*B");
    Tensor mask = Tensor::zeros({K, B});
    for (int64_t i = 0; i < K * B; ++i) mask.at(i) = valid[static_cast<size_t>(i)] ? 1.0 : 0.0;
    Tensor x = ops::scale_rows(fused, mask);
    x = expand_.forward(x);                                  // (K, B, gh*cols*c0)
    Tensor grid = tokens_to_grid(x, kGridH, kColsPerToken, c0_); // (B, c0, 8, 2K)
    grid = res0b_.forward(res0a_.forward(grid));
    grid = ops::relu(up1_.forward(ops::upsample_nearest2x(grid))); // (B, c1, 16, 4K)
    grid = res1b_.forward(res1a_.forward(grid));
    grid = ops::relu(up2_.forward(ops::upsample_nearest2x(grid))); // (B, c2, 32, 8K)
    grid = res2b_.forward(res2a_.forward(grid));
    grid = ops::relu(widen_.forward(grid));                        // (B, c3, 32, 16K)
    grid = res3b_.forward(res3a_.forward(grid));
    return ops::tanh_op(to_gray_.forward(grid)); // (B, 1, 32, 16K)
}

ImageU8 export_generated(const Tensor& batch_images, int64_t item, int64_t true_len) {
    const int64_t H = batch_images.dim(2), W = batch_images.dim(3);
    const int64_t want_w = SynthesisHead::kWidthPerToken * true_len;
    if (want_w > W) throw ShapeError("export_generated: item longer than rendered width");
    Tensor img = Tensor::zeros({H, want_w});
    const double* src = batch_images.data().data() + item * H * W;
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < want_w; ++x) img.at(y * want_w + x) = src[y * W + x];
    return tensor_to_image(img);
}

} // namespace scriptgen
