// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "core/errors.hpp"
#include "core/synthesis_head.hpp"
#include "gradcheck.hpp"

using namespace scriptgen;

TEST_SUITE_BEGIN("synthesis_head");

namespace {
ModelConfig head_cfg() {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.fusion_heads = 2;
    cfg.vit_embed = 8;
    cfg.vit_heads = 2;
    cfg.synth_base_channels = 16;
    return cfg;
}

std::vector<uint8_t> all_valid(int64_t k, int64_t b) {
    return std::vector<uint8_t>(static_cast<size_t>(k * b), 1);
}
} // namespace

TEST_CASE("output width is 16 px per character at height 32") {
    const ModelConfig cfg = head_cfg();
    nn::ParamRegistry reg;
    Rng rng(1);
    SynthesisHead head(cfg, reg, rng);
    Rng data(2);
    Tensor fused4 = Tensor::randn({4, 1, 16}, data);
    Tensor img4 = head.synthesize(fused4, all_valid(4, 1));
    CHECK(img4.shape() == Shape{1, 1, 32, 64});
    Tensor fused1 = Tensor::randn({1, 1, 16}, data);
    Tensor img1 = head.synthesize(fused1, all_valid(1, 1));
    CHECK(img1.shape() == Shape{1, 1, 32, 16});
    for (int64_t i = 0; i < img1.numel(); ++i) {
        CHECK(img1.at(i) <= 1.0);
        CHECK(img1.at(i) >= -1.0);
    }
}

TEST_CASE("synthesis is deterministic in eval mode") {
    const ModelConfig cfg = head_cfg();
    nn::ParamRegistry reg;
    Rng rng(3);
    SynthesisHead head(cfg, reg, rng);
    Rng data(4);
    Tensor fused = Tensor::randn({3, 2, 16}, data);
    Tensor a = head.synthesize(fused, all_valid(3, 2));
    Tensor b = head.synthesize(fused, all_valid(3, 2));
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.at(i) == b.at(i));
    const ImageU8 ia = export_generated(a, 0, 3);
    const ImageU8 ib = export_generated(b, 0, 3);
    CHECK(ia.px == ib.px);
    CHECK(ia.h == 32);
    CHECK(ia.w == 48);
}

TEST_CASE("non-finite input is rejected before rendering") {
    const ModelConfig cfg = head_cfg();
    nn::ParamRegistry reg;
    Rng rng(5);
    SynthesisHead head(cfg, reg, rng);
    Tensor fused = Tensor::zeros({2, 1, 16});
    fused.at(3) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(head.synthesize(fused, all_valid(2, 1)), ValueError);
}

TEST_CASE("masked positions are zeroed and exports crop to the true length") {
    const ModelConfig cfg = head_cfg();
    nn::ParamRegistry reg;
    Rng rng(6);
    SynthesisHead head(cfg, reg, rng);
    Rng data(7);
    // Batch of (len 3, len 1): the short item's padded tail must render the
    // same as if it had been generated alone with zeroed padding.
    Tensor fused = Tensor::randn({3, 2, 16}, data);
    std::vector<uint8_t> valid = {1, 1, 1, 0, 1, 0}; // (k,b) layout
    Tensor out = head.synthesize(fused, valid);
    CHECK(out.shape() == Shape{3 * 0 + 2, 1, 32, 48}); // B=2, width 16*3
    const ImageU8 short_item = export_generated(out, 1, 1);
    CHECK(short_item.w == 16);
    // Same content with explicit zero padding gives identical pixels.
    Tensor padded = fused.detach();
    for (int64_t k = 1; k < 3; ++k)
        for (int64_t d = 0; d < 16; ++d) padded.at((k * 2 + 1) * 16 + d) = 0.0;
    Tensor out2 = head.synthesize(padded, valid);
    const ImageU8 short_item2 = export_generated(out2, 1, 1);
    CHECK(short_item.px == short_item2.px);
    CHECK_THROWS_AS(export_generated(out, 1, 9), ShapeError);
}

TEST_CASE("gradients flow from pixels back to every unmasked token") {
    const ModelConfig cfg = head_cfg();
    nn::ParamRegistry reg;
    Rng rng(8);
    SynthesisHead head(cfg, reg, rng);
    Rng data(9);
    Tensor fused = Tensor::randn({4, 1, 16}, data).set_requires_grad(true);
    Tensor out = head.synthesize(fused, all_valid(4, 1));
    ops::sum_all(ops::mul(out, Tensor::rand_uniform(out.shape(), data, -1.0, 1.0))).backward();
    REQUIRE(fused.has_grad());
    for (int64_t k = 0; k < 4; ++k) {
        double norm = 0.0;
        for (int64_t d = 0; d < 16; ++d) {
            const double g = fused.grad()[static_cast<size_t>(k * 16 + d)];
            norm += g * g;
        }
        CHECK(norm > 0.0);
    }
}

TEST_CASE("synthesis passes central finite differences on a small config") {
    const ModelConfig cfg = head_cfg();
    nn::ParamRegistry reg;
    Rng rng(10);
    SynthesisHead head(cfg, reg, rng);
    Rng data(11);
    Tensor fused = Tensor::randn({2, 1, 16}, data).set_requires_grad(true);
    Rng wrng(12);
    Tensor w;
    auto loss = [&] {
        Tensor out = head.synthesize(fused, all_valid(2, 1));
        if (!w.defined()) w = Tensor::rand_uniform(out.shape(), wrng, -1.0, 1.0);
        return ops::sum_all(ops::mul(out, w));
    };
    Rng pick(13);
    auto r = testutil::finite_difference_check(loss, fused, 10, pick, 1e-5, 1e-3);
    CHECK_MESSAGE(r.ok, r.detail);
    for (const char* name : {"synthesis_head.expand.weight", "synthesis_head.res0a.conv1.weight",
                             "synthesis_head.widen.weight", "synthesis_head.to_gray.weight"}) {
        Tensor& p = reg.get(name);
        auto rp = testutil::finite_difference_check(loss, p, 8, pick, 1e-5, 1e-3);
        const std::string msg = std::string(name) + ": " + rp.detail;
        CHECK_MESSAGE(rp.ok, msg);
    }
}

TEST_SUITE_END();
