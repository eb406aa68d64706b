// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace scriptgen {

// Dense 8-bit raster, row-major, interleaved channels (1 = grayscale,
// 3 = RGB). Word images are grayscale with dark ink on white background.
struct ImageU8 {
    int h{0};
    int w{0};
    int channels{1};
    std::vector<uint8_t> px;

    ImageU8() = default;
    ImageU8(int h, int w, int channels, uint8_t fill = 255)
        : h(h), w(w), channels(channels),
          px(static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(channels), fill) {}

    uint8_t& at(int y, int x, int c = 0) {
        return px[(static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x)) *
                      static_cast<size_t>(channels) +
                  static_cast<size_t>(c)];
    }
    uint8_t at(int y, int x, int c = 0) const {
        return px[(static_cast<size_t>(y) * static_cast<size_t>(w) + static_cast<size_t>(x)) *
                      static_cast<size_t>(channels) +
                  static_cast<size_t>(c)];
    }
    bool empty() const { return px.empty(); }
};

// Lossless raster IO: PGM (P5) for grayscale, PPM (P6) for RGB. The format
// is chosen from the channel count on save and from the magic on load.
void save_image(const ImageU8& img, const std::string& path);
ImageU8 load_image(const std::string& path);

// Height-preserving bilinear resize to the given height; width scales
// proportionally (rounded, at least 1).
ImageU8 resize_to_height(const ImageU8& img, int target_h);

// Pixel mapping between u8 rasters and model tensors: x = px/127.5 - 1,
// so white (255) -> +1 and black (0) -> -1.
Tensor image_to_tensor(const ImageU8& img);              // (C,H,W)
ImageU8 tensor_to_image(const Tensor& t);                // from (C,H,W) or (H,W)
ImageU8 grayscale(const ImageU8& img);

} // namespace scriptgen
