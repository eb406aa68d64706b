// SPDX-License-Identifier: Apache-2.0
#include "core/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "core/errors.hpp"

namespace scriptgen {

void save_image(const ImageU8& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw ValueError("save_image: only 1- or 3-channel rasters supported");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << (img.channels == 1 ? "P5" : "P6") << "\n" << img.w << " " << img.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
    if (!out) throw IoError("write failed: " + path);
}

namespace {
int next_pnm_int(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comments per the PNM grammar.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw FormatError("truncated PNM header: " + path);
    int v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw FormatError("malformed PNM header: " + path);
    return v;
}
} // namespace

ImageU8 load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw FormatError("unsupported raster format: " + path);
    const int channels = m1 == '5' ? 1 : 3;
    const int w = next_pnm_int(in, path);
    const int h = next_pnm_int(in, path);
    const int maxval = next_pnm_int(in, path);
    if (maxval != 255) throw FormatError("only 8-bit rasters supported: " + path);
    if (w <= 0 || h <= 0) throw FormatError("bad raster dimensions: " + path);
    ImageU8 img(h, w, channels);
    in.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.px.size()))
        throw FormatError("truncated raster payload: " + path);
    return img;
}

ImageU8 resize_to_height(const ImageU8& img, int target_h) {
    if (img.h == target_h) return img;
    const double scale = static_cast<double>(target_h) / static_cast<double>(img.h);
    const int target_w = std::max(1, static_cast<int>(std::lround(img.w * scale)));
    ImageU8 out(target_h, target_w, img.channels);
    for (int y = 0; y < target_h; ++y) {
        // Pixel-center convention: src = (dst + 0.5)/scale - 0.5, clamped.
        double sy = (y + 0.5) * img.h / static_cast<double>(target_h) - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(img.h - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, img.h - 1);
        const double fy = sy - y0;
        for (int x = 0; x < target_w; ++x) {
            double sx = (x + 0.5) * img.w / static_cast<double>(target_w) - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(img.w - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, img.w - 1);
            const double fx = sx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double v = (1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
                                 fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c));
                out.at(y, x, c) = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return out;
}

Tensor image_to_tensor(const ImageU8& img) {
    Tensor t = Tensor::zeros({img.channels, img.h, img.w});
    auto& d = t.data();
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                d[static_cast<size_t>((c * img.h + y) * img.w + x)] =
                    img.at(y, x, c) / 127.5 - 1.0;
    return t;
}

ImageU8 tensor_to_image(const Tensor& t) {
    int c = 1, h = 0, w = 0;
    if (t.ndim() == 3) {
        c = static_cast<int>(t.dim(0));
        h = static_cast<int>(t.dim(1));
        w = static_cast<int>(t.dim(2));
    } else if (t.ndim() == 2) {
        h = static_cast<int>(t.dim(0));
        w = static_cast<int>(t.dim(1));
    } else {
        throw ShapeError("tensor_to_image: expected (C,H,W) or (H,W)");
    }
    if (c != 1 && c != 3) throw ShapeError("tensor_to_image: channel count must be 1 or 3");
    ImageU8 img(h, w, c);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = (t.at((ci * h + y) * static_cast<int64_t>(w) + x) + 1.0) * 127.5;
                img.at(y, x, ci) = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
    return img;
}

ImageU8 grayscale(const ImageU8& img) {
    if (img.channels == 1) return img;
    ImageU8 out(img.h, img.w, 1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            int acc = 0;
            for (int c = 0; c < img.channels; ++c) acc += img.at(y, x, c);
            out.at(y, x) = static_cast<uint8_t>(acc / img.channels);
        }
    return out;
}

} // namespace scriptgen
