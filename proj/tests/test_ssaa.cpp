// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "core/errors.hpp"
#include "core/ssaa.hpp"

using namespace scriptgen;
using namespace scriptgen::ssaa;

TEST_SUITE_BEGIN("ssaa");

namespace {

AttentionRecord record_from(Tensor weights, std::string word = "w") {
    AttentionRecord r;
    r.weights = std::move(weights);
    r.word = std::move(word);
    return r;
}

// Row-stochastic random (H,K,L) tensor.
Tensor random_attention(int64_t H, int64_t K, int64_t L, Rng& rng) {
    Tensor a = Tensor::zeros({H, K, L});
    for (int64_t h = 0; h < H; ++h)
        for (int64_t k = 0; k < K; ++k) {
            double sum = 0.0;
            for (int64_t l = 0; l < L; ++l) {
                const double v = rng.uniform(0.0, 1.0);
                a.at((h * K + k) * L + l) = v;
                sum += v;
            }
            for (int64_t l = 0; l < L; ++l) a.at((h * K + k) * L + l) /= sum;
        }
    return a;
}

} // namespace

TEST_CASE("average_attention: degenerate and idempotent cases") {
    // H=1, K=1: the average is the single row.
    Tensor a = Tensor::from_data({1, 1, 4}, {0.1, 0.2, 0.3, 0.4});
    const auto v = average_attention(record_from(a));
    for (int64_t l = 0; l < 4; ++l) CHECK(v.values[static_cast<size_t>(l)] == a.at(l));
    // Two identical heads average to the same row.
    Tensor two = Tensor::zeros({2, 1, 4});
    for (int64_t h = 0; h < 2; ++h)
        for (int64_t l = 0; l < 4; ++l) two.at(h * 4 + l) = a.at(l);
    const auto v2 = average_attention(record_from(two));
    for (int64_t l = 0; l < 4; ++l)
        CHECK(v2.values[static_cast<size_t>(l)] == doctest::Approx(a.at(l)).epsilon(1e-15));
    Tensor bad = Tensor::zeros({1, 1, 2});
    bad.at(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(average_attention(record_from(bad)), ValueError);
}

TEST_CASE("average_attention matches the triple-loop oracle and conserves mass") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor a = random_attention(2, 3, 4, rng);
        const auto v = average_attention(record_from(a));
        for (int64_t l = 0; l < 4; ++l) {
            double acc = 0.0;
            for (int64_t h = 0; h < 2; ++h)
                for (int64_t k = 0; k < 3; ++k) acc += a.at((h * 3 + k) * 4 + l);
            acc /= 6.0;
            CHECK(std::abs(v.values[static_cast<size_t>(l)] - acc) < 1e-7);
        }
        double total = 0.0;
        for (double x : v.values) total += x;
        CHECK(std::abs(total - 1.0) < 1e-5);
    }
}

TEST_CASE("reconstruct_maps: uniform attention has no signal") {
    WordAttentionVector a;
    a.values.assign(5 * 196, 1.0 / (5 * 196));
    const AttentionMaps maps = reconstruct_maps(a, 5, 14, 224);
    REQUIRE(maps.maps.size() == 5);
    for (int n = 0; n < 5; ++n) {
        CHECK(maps.constant_input[static_cast<size_t>(n)]);
        for (double v : maps.maps[static_cast<size_t>(n)]) CHECK(v == 0.0);
    }
}

TEST_CASE("reconstruct_maps: delta mass peaks in the top-left patch neighborhood") {
    WordAttentionVector a;
    a.values.assign(5 * 196, 0.0);
    a.values[0] = 1.0;
    const AttentionMaps maps = reconstruct_maps(a, 5, 14, 224);
    const auto& m0 = maps.maps[0];
    // Peak value 1.0 lives inside the top-left 16x16 patch footprint.
    double best = -1.0;
    int64_t best_idx = 0;
    for (size_t i = 0; i < m0.size(); ++i)
        if (m0[i] > best) {
            best = m0[i];
            best_idx = static_cast<int64_t>(i);
        }
    CHECK(best == 1.0);
    CHECK(best_idx % 224 < 16);
    CHECK(best_idx / 224 < 16);
    for (int n = 1; n < 5; ++n)
        for (double v : maps.maps[static_cast<size_t>(n)]) CHECK(v == 0.0);
}

TEST_CASE("reconstruct_maps equals an independent bilinear oracle on a checkerboard") {
    const int side = 4, img = 32, n_img = 1;
    WordAttentionVector a;
    a.values.assign(static_cast<size_t>(side * side), 0.0);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) a.values[static_cast<size_t>(r * side + c)] = (r + c) % 2 ? 1.0 : 0.0;
    const AttentionMaps maps = reconstruct_maps(a, n_img, side, img);
    // Oracle: direct bilinear interpolation with the same pixel-center
    // convention, then min-max normalization.
    std::vector<double> oracle(static_cast<size_t>(img * img));
    for (int y = 0; y < img; ++y)
        for (int x = 0; x < img; ++x) {
            auto sample = [&](double sy, double sx) {
                sy = std::clamp(sy, 0.0, static_cast<double>(side - 1));
                sx = std::clamp(sx, 0.0, static_cast<double>(side - 1));
                const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
                const int y1 = std::min(y0 + 1, side - 1), x1 = std::min(x0 + 1, side - 1);
                const double fy = sy - y0, fx = sx - x0;
                return (1 - fy) * ((1 - fx) * a.values[static_cast<size_t>(y0 * side + x0)] +
                                   fx * a.values[static_cast<size_t>(y0 * side + x1)]) +
                       fy * ((1 - fx) * a.values[static_cast<size_t>(y1 * side + x0)] +
                             fx * a.values[static_cast<size_t>(y1 * side + x1)]);
            };
            oracle[static_cast<size_t>(y * img + x)] =
                sample((y + 0.5) * side / static_cast<double>(img) - 0.5,
                       (x + 0.5) * side / static_cast<double>(img) - 0.5);
        }
    double lo = oracle[0], hi = oracle[0];
    for (double v : oracle) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (auto& v : oracle) v = (v - lo) / (hi - lo);
    for (size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(maps.maps[0][i] - oracle[i]) < 1e-6);
    CHECK_THROWS_AS(reconstruct_maps(a, 5, 14, 224), ShapeError);
}

TEST_CASE("otsu separates a bimodal image strictly between the modes") {
    ImageU8 img(20, 20, 1);
    Rng rng(2);
    for (auto& p : img.px) p = rng.uniform(0.0, 1.0) < 0.3 ? 20 : 235;
    const InkMask m = ink_mask(img);
    CHECK(m.threshold > 20);
    CHECK(m.threshold < 235);
    CHECK_FALSE(m.blank_input);
    // Ink = the dark class (before the median filter cleans speckle, the
    // dark fraction matches the 20-valued pixels; compare masks loosely).
    int64_t dark = 0, ink = 0;
    for (size_t i = 0; i < img.px.size(); ++i) {
        if (img.px[i] == 20) ++dark;
        if (m.mask[i]) ++ink;
    }
    CHECK(dark > 0);
    CHECK(ink > 0);
}

TEST_CASE("otsu equals the exhaustive between-class-variance argmax on random histograms") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int64_t> hist(256, 0);
        for (int i = 0; i < 256; ++i) hist[static_cast<size_t>(i)] = static_cast<int64_t>(rng.next_below(50));
        int64_t total = 0;
        for (int64_t h : hist) total += h;
        if (total == 0) hist[7] = 3;
        const int got = otsu_threshold(hist);
        // Exhaustive oracle over all partitions [0,t) vs [t,255].
        double best = -1.0;
        int best_t = 1;
        for (int t = 1; t <= 255; ++t) {
            double w0 = 0, w1 = 0, s0 = 0, s1 = 0;
            for (int i = 0; i < t; ++i) {
                w0 += static_cast<double>(hist[static_cast<size_t>(i)]);
                s0 += static_cast<double>(i) * hist[static_cast<size_t>(i)];
            }
            for (int i = t; i < 256; ++i) {
                w1 += static_cast<double>(hist[static_cast<size_t>(i)]);
                s1 += static_cast<double>(i) * hist[static_cast<size_t>(i)];
            }
            if (w0 == 0 || w1 == 0) continue;
            const double mu0 = s0 / w0, mu1 = s1 / w1;
            const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
            if (var > best) {
                best = var;
                best_t = t;
            }
        }
        CHECK(got == best_t);
    }
}

TEST_CASE("blank input yields an empty mask with a warning, not an error") {
    ImageU8 img(16, 16, 1, 137);
    const InkMask m = ink_mask(img);
    CHECK(m.blank_input);
    for (uint8_t v : m.mask) CHECK(v == 0);
}

TEST_CASE("median filter removes an isolated ink pixel") {
    std::vector<uint8_t> mask(49, 0);
    mask[3 * 7 + 3] = 1;
    const auto cleaned = median_filter_3x3(mask, 7, 7);
    for (uint8_t v : cleaned) CHECK(v == 0);
    // A solid 3x3 block survives.
    std::vector<uint8_t> solid(49, 0);
    for (int y = 2; y <= 4; ++y)
        for (int x = 2; x <= 4; ++x) solid[static_cast<size_t>(y * 7 + x)] = 1;
    const auto kept = median_filter_3x3(solid, 7, 7);
    CHECK(kept[3 * 7 + 3] == 1);
}

TEST_CASE("masked attention is an exact elementwise product with ink") {
    Rng rng(4);
    std::vector<double> map(64);
    std::vector<uint8_t> mask(64);
    for (auto& v : map) v = rng.uniform(0.0, 1.0);
    for (auto& v : mask) v = rng.next_below(2) ? 1 : 0;
    const auto mai = masked_attention(map, mask);
    for (size_t i = 0; i < 64; ++i) CHECK(mai[i] == (mask[i] ? map[i] : 0.0));
    // Annihilation and identity.
    const auto zero = masked_attention(map, std::vector<uint8_t>(64, 0));
    for (double v : zero) CHECK(v == 0.0);
    const auto ones = masked_attention(std::vector<double>(64, 1.0), mask);
    for (size_t i = 0; i < 64; ++i) CHECK(ones[i] == (mask[i] ? 1.0 : 0.0));
    CHECK_THROWS_AS(masked_attention(map, std::vector<uint8_t>(32, 0)), ShapeError);
    // MAI maps are pointwise <= the unmasked map.
    for (size_t i = 0; i < 64; ++i) CHECK(mai[i] <= map[i]);
}

TEST_CASE("salient strokes keep constructed blobs in attention order") {
    const int h = 20, w = 20;
    std::vector<double> mai(static_cast<size_t>(h * w), 0.0);
    // Two disjoint 5x5 blobs with values 1.0 and 0.5.
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x) mai[static_cast<size_t>(y * w + x)] = 1.0;
    for (int y = 12; y <= 16; ++y)
        for (int x = 12; x <= 16; ++x) mai[static_cast<size_t>(y * w + x)] = 0.5;
    const SalientStrokeSet both = salient_strokes(mai, h, w, 40.0, 10, 5);
    REQUIRE(both.components.size() == 2);
    CHECK(both.components[0].mean_attention == doctest::Approx(1.0));
    CHECK(both.components[1].mean_attention == doctest::Approx(0.5));
    CHECK(both.components[0].area() == 25);
    // min_area 30 removes both 25-px blobs.
    const SalientStrokeSet none = salient_strokes(mai, h, w, 40.0, 30, 5);
    CHECK(none.components.empty());
    // All-zero MAI is an empty set.
    const SalientStrokeSet zero = salient_strokes(std::vector<double>(static_cast<size_t>(h * w), 0.0), h, w);
    CHECK(zero.components.empty());
}

TEST_CASE("component labeling matches a brute-force flood fill") {
    Rng rng(5);
    const int h = 24, w = 24;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> mai(static_cast<size_t>(h * w), 0.0);
        for (auto& v : mai)
            if (rng.uniform(0.0, 1.0) < 0.25) v = rng.uniform(0.1, 1.0);
        // Threshold at the 0th percentile of nonzeros keeps every nonzero
        // pixel, so components partition exactly the nonzero support.
        const SalientStrokeSet got = salient_strokes(mai, h, w, 0.0, 1, 1000);
        // Flood-fill oracle (8-connected) over nonzero pixels.
        std::vector<int> label(static_cast<size_t>(h * w), -1);
        int next = 0;
        std::vector<std::set<int64_t>> comps;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (mai[static_cast<size_t>(y * w + x)] <= 0.0 || label[static_cast<size_t>(y * w + x)] >= 0)
                    continue;
                std::set<int64_t> comp;
                std::vector<int64_t> stack{y * w + x};
                label[static_cast<size_t>(y * w + x)] = next;
                while (!stack.empty()) {
                    const int64_t p = stack.back();
                    stack.pop_back();
                    comp.insert(p);
                    const int py = static_cast<int>(p / w), px = static_cast<int>(p % w);
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int ny = py + dy, nx = px + dx;
                            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                            const int64_t q = ny * w + nx;
                            if (mai[static_cast<size_t>(q)] > 0.0 && label[static_cast<size_t>(q)] < 0) {
                                label[static_cast<size_t>(q)] = next;
                                stack.push_back(q);
                            }
                        }
                }
                comps.push_back(std::move(comp));
                ++next;
            }
        REQUIRE(got.components.size() == comps.size());
        std::set<std::set<int64_t>> got_sets, want_sets;
        for (const auto& c : got.components)
            got_sets.insert(std::set<int64_t>(c.pixels.begin(), c.pixels.end()));
        for (const auto& c : comps) want_sets.insert(c);
        CHECK(got_sets == want_sets);
    }
}

TEST_CASE("render_grid blends highlights and is deterministic") {
    Rng rng(6);
    std::vector<ImageU8> style(5, ImageU8(64, 64, 3, 200));
    std::vector<SalientStrokeSet> strokes(5);
    // Empty stroke sets: output equals the unannotated grid.
    const ImageU8 plain = render_grid(style, strokes, "word");
    const ImageU8 plain2 = render_grid(style, strokes, "word");
    CHECK(plain.px == plain2.px);
    // One full-image component on image 0: every pixel blends by the
    // alpha formula out = 0.55*orig + 0.45*highlight.
    StrokeComponent full;
    for (int64_t p = 0; p < 64 * 64; ++p) full.pixels.push_back(p);
    strokes[0].components.push_back(full);
    const ImageU8 blended = render_grid(style, strokes, "word", 0.45);
    const int caption_h = blended.h - 64;
    const double highlight[3] = {255.0, 64.0, 64.0};
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) {
                const double expect = 0.55 * 200.0 + 0.45 * highlight[c];
                CHECK(static_cast<double>(blended.at(caption_h + y, x, c)) ==
                      doctest::Approx(expect).epsilon(0.01));
            }
    // Images 1..4 are untouched.
    const int tile_off = 64 + 8;
    CHECK(blended.at(caption_h + 10, tile_off + 10, 0) == 200);
    CHECK_THROWS_AS(render_grid(style, std::vector<SalientStrokeSet>(4), "w"), ValueError);
}

TEST_CASE("nearest-rank percentile of nonzero values") {
    std::vector<double> v = {0.0, 0.5, 0.0, 1.0, 0.25, 0.75};
    // nonzeros sorted: 0.25 0.5 0.75 1.0
    CHECK(percentile_of_nonzero(v, 50.0) == 0.5);
    CHECK(percentile_of_nonzero(v, 100.0) == 1.0);
    CHECK(percentile_of_nonzero(v, 1.0) == 0.25);
    CHECK(percentile_of_nonzero(std::vector<double>(4, 0.0), 90.0) == 0.0);
}

TEST_SUITE_END();
