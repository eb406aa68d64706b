// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/fusion_core.hpp"
#include "core/image.hpp"

namespace scriptgen {
namespace ssaa {

// Head- and position-averaged attention over the style patches:
// a_word[l] = (1/(H*K)) sum_h sum_k A[h,k,l].
struct WordAttentionVector {
    std::vector<double> values; // length L
    std::string word;
    std::vector<PatchProvenance> provenance;
};
WordAttentionVector average_attention(const AttentionRecord& record);

// Per style image: patch grid -> bilinear upsample to image resolution ->
// min-max normalize to [0,1]. A constant grid has no signal and maps to
// all zeros (flagged).
struct AttentionMaps {
    int image_size{0};
    std::vector<std::vector<double>> maps; // N maps, image_size^2 each
    std::vector<bool> constant_input;      // per image
};
AttentionMaps reconstruct_maps(const WordAttentionVector& a, int num_images, int grid_side,
                               int image_size);

// Otsu binarization of a style image; ink is the dark class (pixel < t),
// cleaned with a 3x3 median filter. Single-intensity images yield an
// empty mask with a warning flag instead of an error.
struct InkMask {
    int h{0}, w{0};
    std::vector<uint8_t> mask; // 0/1
    int threshold{0};
    int median_kernel{3};
    bool blank_input{false};
};
int otsu_threshold(const std::vector<int64_t>& histogram);
InkMask ink_mask(const ImageU8& style_image);
std::vector<uint8_t> median_filter_3x3(const std::vector<uint8_t>& mask, int h, int w);

// Masked Attention on Ink: elementwise product, background exactly 0.
std::vector<double> masked_attention(const std::vector<double>& map,
                                     const std::vector<uint8_t>& mask);

struct StrokeComponent {
    std::vector<int64_t> pixels; // linear indices
    int min_x{0}, min_y{0}, max_x{0}, max_y{0};
    double mean_attention{0};
    int64_t area() const { return static_cast<int64_t>(pixels.size()); }
};
struct SalientStrokeSet {
    std::vector<StrokeComponent> components; // sorted by mean attention, descending
    double threshold{0};
    double percentile{90};
    int64_t min_area{20};
};

// Thresholds the MAI map at the given percentile of its nonzero values,
// labels 8-connected components, drops small ones, keeps the top_k by
// mean attention.
SalientStrokeSet salient_strokes(const std::vector<double>& mai_map, int h, int w,
                                 double percentile = 90.0, int64_t min_area = 20,
                                 int64_t top_k = 5);

// Nearest-rank percentile of the nonzero entries.
double percentile_of_nonzero(const std::vector<double>& values, double percentile);

// Row of the N style images with alpha-blended highlights over the
// salient strokes, captioned with the generated word.
ImageU8 render_grid(const std::vector<ImageU8>& style_images,
                    const std::vector<SalientStrokeSet>& stroke_sets, const std::string& word,
                    double alpha = 0.45);

} // namespace ssaa
} // namespace scriptgen
