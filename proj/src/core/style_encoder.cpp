// SPDX-License-Identifier: Apache-2.0
#include "core/style_encoder.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace scriptgen {

namespace {

// (S,C,H,W) -> (P, S, C*p*p): patch p0 of every image first, row-major
// over the patch grid, channel-major inside each patch.
Tensor extract_patches(const Tensor& x, int patch, int side) {
    const int64_t S = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t P = static_cast<int64_t>(side) * side;
    const int64_t D = C * patch * patch;
    std::vector<double> out(static_cast<size_t>(P * S * D));
    auto src_index = [side, C, H, W, patch](int64_t s, int64_t p, int64_t d) {
        const int64_t pr = p / side, pc = p % side;
        const int64_t c = d / (patch * patch);
        const int64_t within = d % (patch * patch);
        const int64_t ii = pr * patch + within / patch;
        const int64_t jj = pc * patch + within % patch;
        return ((s * C + c) * H + ii) * W + jj;
    };
    for (int64_t p = 0; p < P; ++p)
        for (int64_t s = 0; s < S; ++s)
            for (int64_t d = 0; d < D; ++d)
                out[static_cast<size_t>((p * S + s) * D + d)] = x.at(src_index(s, p, d));
    return ops::make_op_node({P, S, D}, std::move(out), {x},
                             [x, S, P, D, src_index](TensorImpl& self) mutable {
                                 if (!x.needs_grad()) return;
                                 auto& dst = x.grad_mutable();
                                 for (int64_t p = 0; p < P; ++p)
                                     for (int64_t s = 0; s < S; ++s)
                                         for (int64_t d = 0; d < D; ++d)
                                             dst[static_cast<size_t>(src_index(s, p, d))] +=
                                                 self.grad[static_cast<size_t>((p * S + s) * D + d)];
                             });
}

// (P, S = B*N, D) -> (N*P, B, D): memory row n*P + p holds patch p of
// style image n, matching patch_provenance.
Tensor fold_style_memory(const Tensor& x, int64_t n_images) {
    const int64_t P = x.dim(0), S = x.dim(1), D = x.dim(2);
    const int64_t B = S / n_images;
    std::vector<double> out(static_cast<size_t>(x.numel()));
    for (int64_t n = 0; n < n_images; ++n)
        for (int64_t p = 0; p < P; ++p)
            for (int64_t b = 0; b < B; ++b)
                std::copy_n(x.data().data() + ((p * S) + (b * n_images + n)) * D, D,
                            out.data() + (((n * P + p) * B) + b) * D);
    return ops::make_op_node({n_images * P, B, D}, std::move(out), {x},
                             [x, P, B, D, n_images](TensorImpl& self) mutable {
                                 if (!x.needs_grad()) return;
                                 auto& dst = x.grad_mutable();
                                 const int64_t S = B * n_images;
                                 for (int64_t n = 0; n < n_images; ++n)
                                     for (int64_t p = 0; p < P; ++p)
                                         for (int64_t b = 0; b < B; ++b) {
                                             const double* g =
                                                 self.grad.data() + (((n * P + p) * B) + b) * D;
                                             double* d = dst.data() +
                                                         ((p * S) + (b * n_images + n)) * D;
                                             for (int64_t c = 0; c < D; ++c) d[c] += g[c];
                                         }
                             });
}

} // namespace

PatchProvenance patch_provenance(int64_t memory_index, const ModelConfig& cfg) {
    const int64_t P = cfg.patches_per_image();
    const int side = cfg.patches_per_side();
    if (memory_index < 0 || memory_index >= cfg.style_len())
        throw ValueError("patch_provenance: index " + std::to_string(memory_index) +
                         " out of range [0, " + std::to_string(cfg.style_len()) + ")");
    const int64_t within = memory_index % P;
    return {static_cast<int>(memory_index / P), static_cast<int>(within / side),
            static_cast<int>(within % side)};
}

std::vector<PatchProvenance> patch_provenance_table(const ModelConfig& cfg) {
    std::vector<PatchProvenance> table;
    table.reserve(static_cast<size_t>(cfg.style_len()));
    for (int64_t l = 0; l < cfg.style_len(); ++l) table.push_back(patch_provenance(l, cfg));
    return table;
}

StyleEncoder::StyleEncoder(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng) : cfg_(cfg) {
    const int64_t patch_dim = 3LL * cfg.patch_size * cfg.patch_size;
    const int64_t E = cfg.vit_embed;
    patch_embed_ = nn::Linear(reg, "style_encoder.patch_embed", patch_dim, E, rng);
    cls_token_ = reg.add("style_encoder.cls", Tensor::randn({E}, rng, 0.02));
    pos_embed_ = reg.add("style_encoder.pos",
                         Tensor::randn({cfg.patches_per_image() + 1, E}, rng, 0.02));
    const auto mlp = static_cast<int64_t>(std::lround(cfg.vit_mlp_ratio * static_cast<double>(E)));
    blocks_.reserve(static_cast<size_t>(cfg.vit_depth));
    for (int i = 0; i < cfg.vit_depth; ++i) {
        const std::string base = "style_encoder.block" + std::to_string(i);
        Block b;
        b.ln1 = nn::LayerNorm(reg, base + ".ln1", E);
        b.attn = nn::MultiheadAttention(reg, base + ".attn", E, cfg.vit_heads, rng);
        b.ln2 = nn::LayerNorm(reg, base + ".ln2", E);
        b.fc1 = nn::Linear(reg, base + ".fc1", E, mlp, rng);
        b.fc2 = nn::Linear(reg, base + ".fc2", mlp, E, rng);
        blocks_.push_back(std::move(b));
    }
    final_ln_ = nn::LayerNorm(reg, "style_encoder.final_ln", E);
    proj_ = nn::Linear(reg, "style_encoder.proj", E, cfg.d_model, rng);
    proj_ln_ = nn::LayerNorm(reg, "style_encoder.proj_ln", cfg.d_model);
}

Tensor StyleEncoder::stack_style_sets(const std::vector<StyleSampleSet>& sets,
                                      const ModelConfig& cfg) {
    const int64_t B = static_cast<int64_t>(sets.size());
    const int64_t N = cfg.num_style_images;
    const int64_t hw = cfg.image_size;
    Tensor out = Tensor::zeros({B * N, 3, hw, hw});
    auto& d = out.data();
    for (int64_t b = 0; b < B; ++b) {
        if (static_cast<int64_t>(sets[static_cast<size_t>(b)].images.size()) != N)
            throw ShapeError("style set must hold exactly " + std::to_string(N) + " images");
        for (int64_t n = 0; n < N; ++n) {
            const ImageU8& img = sets[static_cast<size_t>(b)].images[static_cast<size_t>(n)];
            if (img.h != hw || img.w != hw || img.channels != 3)
                throw ShapeError("style image must be 3x" + std::to_string(hw) + "x" +
                                 std::to_string(hw) + ", got " + std::to_string(img.channels) +
                                 "x" + std::to_string(img.h) + "x" + std::to_string(img.w));
            double* dst = d.data() + ((b * N + n) * 3) * hw * hw;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < hw; ++y)
                    for (int x = 0; x < hw; ++x)
                        dst[(c * hw + y) * hw + x] = img.at(y, x, c) / 127.5 - 1.0;
        }
    }
    return out;
}

StyleMemory StyleEncoder::encode(const Tensor& images, int64_t batch) const {
    if (images.ndim() != 4 || images.dim(1) != 3 || images.dim(2) != cfg_.image_size ||
        images.dim(3) != cfg_.image_size)
        throw ShapeError("encode_style: expected (S,3," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + ") input, got " +
                         shape_str(images.shape()));
    const int64_t S = images.dim(0);
    const int64_t N = cfg_.num_style_images;
    if (S != batch * N)
        throw ShapeError("encode_style: image count " + std::to_string(S) + " != batch*" +
                         std::to_string(N));
    const int side = cfg_.patches_per_side();
    Tensor tokens = patch_embed_.forward(extract_patches(images, cfg_.patch_size, side));
    Tensor cls = ops::tile_row(cls_token_, S);           // (1, S, E)
    Tensor x = ops::concat_dim0({cls, tokens});          // (1+P, S, E)
    x = ops::add_pos_embed(x, pos_embed_);
    for (const Block& b : blocks_) {
        Tensor h = b.ln1.forward(x);
        x = ops::add(x, b.attn.forward(h, h));
        Tensor m = b.ln2.forward(x);
        x = ops::add(x, b.fc2.forward(ops::gelu(b.fc1.forward(m))));
    }
    x = final_ln_.forward(x);
    Tensor patches_only = ops::slice_dim0(x, 1, cfg_.patches_per_image());
    Tensor projected = proj_ln_.forward(proj_.forward(patches_only)); // (P, S, d_model)
    StyleMemory mem;
    mem.memory = fold_style_memory(projected, N);
    mem.provenance.reserve(static_cast<size_t>(cfg_.style_len()));
    for (int64_t l = 0; l < cfg_.style_len(); ++l) mem.provenance.push_back(patch_provenance(l, cfg_));
    return mem;
}

} // namespace scriptgen
