// SPDX-License-Identifier: Apache-2.0
#include "core/ssaa.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "core/errors.hpp"
#include "core/glyphs.hpp"

namespace scriptgen {
namespace ssaa {

WordAttentionVector average_attention(const AttentionRecord& record) {
    const Tensor& A = record.weights;
    if (A.ndim() != 3) throw ShapeError("average_attention: expected (H,K,L)");
    if (!A.all_finite()) throw ValueError("average_attention: non-finite attention weights");
    const int64_t H = A.dim(0), K = A.dim(1), L = A.dim(2);
    WordAttentionVector out;
    out.word = record.word;
    out.provenance = record.provenance;
    out.values.assign(static_cast<size_t>(L), 0.0);
    for (int64_t h = 0; h < H; ++h)
        for (int64_t k = 0; k < K; ++k)
            for (int64_t l = 0; l < L; ++l)
                out.values[static_cast<size_t>(l)] += A.at((h * K + k) * L + l);
    const double inv = 1.0 / static_cast<double>(H * K);
    for (double& v : out.values) v *= inv;
    return out;
}

AttentionMaps reconstruct_maps(const WordAttentionVector& a, int num_images, int grid_side,
                               int image_size) {
    const int64_t per_image = static_cast<int64_t>(grid_side) * grid_side;
    if (static_cast<int64_t>(a.values.size()) != num_images * per_image)
        throw ShapeError("reconstruct_maps: attention length " + std::to_string(a.values.size()) +
                         " != " + std::to_string(num_images) + " images x " +
                         std::to_string(per_image) + " patches");
    AttentionMaps out;
    out.image_size = image_size;
    out.maps.resize(static_cast<size_t>(num_images));
    out.constant_input.resize(static_cast<size_t>(num_images));
    for (int n = 0; n < num_images; ++n) {
        const double* grid = a.values.data() + static_cast<int64_t>(n) * per_image;
        std::vector<double>& map = out.maps[static_cast<size_t>(n)];
        map.assign(static_cast<size_t>(image_size) * image_size, 0.0);
        // Bilinear upsample, pixel-center convention.
        for (int y = 0; y < image_size; ++y) {
            double sy = (y + 0.5) * grid_side / static_cast<double>(image_size) - 0.5;
            sy = std::clamp(sy, 0.0, static_cast<double>(grid_side - 1));
            const int y0 = static_cast<int>(sy);
            const int y1 = std::min(y0 + 1, grid_side - 1);
            const double fy = sy - y0;
            for (int x = 0; x < image_size; ++x) {
                double sx = (x + 0.5) * grid_side / static_cast<double>(image_size) - 0.5;
                sx = std::clamp(sx, 0.0, static_cast<double>(grid_side - 1));
                const int x0 = static_cast<int>(sx);
                const int x1 = std::min(x0 + 1, grid_side - 1);
                const double fx = sx - x0;
                map[static_cast<size_t>(y) * image_size + x] =
                    (1 - fy) * ((1 - fx) * grid[y0 * grid_side + x0] + fx * grid[y0 * grid_side + x1]) +
                    fy * ((1 - fx) * grid[y1 * grid_side + x0] + fx * grid[y1 * grid_side + x1]);
            }
        }
        double lo = map[0], hi = map[0];
        for (double v : map) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < 1e-15) {
            // Constant attention carries no per-patch signal.
            std::fill(map.begin(), map.end(), 0.0);
            out.constant_input[static_cast<size_t>(n)] = true;
        } else {
            const double inv = 1.0 / (hi - lo);
            for (double& v : map) v = (v - lo) * inv;
            out.constant_input[static_cast<size_t>(n)] = false;
        }
    }
    return out;
}

int otsu_threshold(const std::vector<int64_t>& histogram) {
    if (histogram.size() != 256) throw ShapeError("otsu: expected a 256-bin histogram");
    int64_t total = 0;
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) {
        total += histogram[static_cast<size_t>(i)];
        sum_all += static_cast<double>(i) * histogram[static_cast<size_t>(i)];
    }
    if (total == 0) throw ValueError("otsu: empty histogram");
    // Partition at t: class0 = [0, t), class1 = [t, 255]. First argmax of
    // the between-class variance wins.
    double best = -1.0;
    int best_t = 1;
    int64_t w0 = 0;
    double sum0 = 0.0;
    for (int t = 1; t <= 255; ++t) {
        w0 += histogram[static_cast<size_t>(t - 1)];
        sum0 += static_cast<double>(t - 1) * histogram[static_cast<size_t>(t - 1)];
        const int64_t w1 = total - w0;
        if (w0 == 0 || w1 == 0) continue;
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double var = static_cast<double>(w0) * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best) {
            best = var;
            best_t = t;
        }
    }
    return best_t;
}

std::vector<uint8_t> median_filter_3x3(const std::vector<uint8_t>& mask, int h, int w) {
    std::vector<uint8_t> out(mask.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w)
                        count += mask[static_cast<size_t>(yy) * w + xx];
                }
            // Median of 9 with out-of-bounds as background.
            out[static_cast<size_t>(y) * w + x] = count >= 5 ? 1 : 0;
        }
    return out;
}

InkMask ink_mask(const ImageU8& style_image) {
    const ImageU8 gray = grayscale(style_image);
    InkMask m;
    m.h = gray.h;
    m.w = gray.w;
    std::vector<int64_t> hist(256, 0);
    for (uint8_t v : gray.px) ++hist[v];
    int distinct = 0;
    for (int64_t c : hist)
        if (c > 0) ++distinct;
    if (distinct <= 1) {
        m.mask.assign(gray.px.size(), 0);
        m.threshold = 0;
        m.blank_input = true;
        return m;
    }
    m.threshold = otsu_threshold(hist);
    std::vector<uint8_t> raw(gray.px.size());
    for (size_t i = 0; i < gray.px.size(); ++i) raw[i] = gray.px[i] < m.threshold ? 1 : 0;
    m.mask = median_filter_3x3(raw, m.h, m.w);
    return m;
}

std::vector<double> masked_attention(const std::vector<double>& map,
                                     const std::vector<uint8_t>& mask) {
    if (map.size() != mask.size()) throw ShapeError("masked_attention: shape mismatch");
    std::vector<double> out(map.size());
    for (size_t i = 0; i < map.size(); ++i) out[i] = mask[i] ? map[i] : 0.0;
    return out;
}

double percentile_of_nonzero(const std::vector<double>& values, double percentile) {
    std::vector<double> nz;
    for (double v : values)
        if (v > 0.0) nz.push_back(v);
    if (nz.empty()) return 0.0;
    std::sort(nz.begin(), nz.end());
    const auto n = static_cast<int64_t>(nz.size());
    auto rank = static_cast<int64_t>(std::ceil(percentile / 100.0 * static_cast<double>(n)));
    rank = std::clamp<int64_t>(rank, 1, n);
    return nz[static_cast<size_t>(rank - 1)];
}

SalientStrokeSet salient_strokes(const std::vector<double>& mai_map, int h, int w,
                                 double percentile, int64_t min_area, int64_t top_k) {
    if (static_cast<int64_t>(mai_map.size()) != static_cast<int64_t>(h) * w)
        throw ShapeError("salient_strokes: map size mismatch");
    SalientStrokeSet out;
    out.percentile = percentile;
    out.min_area = min_area;
    out.threshold = percentile_of_nonzero(mai_map, percentile);
    if (out.threshold <= 0.0) return out; // all-zero MAI -> empty set
    std::vector<uint8_t> keep(mai_map.size(), 0);
    for (size_t i = 0; i < mai_map.size(); ++i) keep[i] = mai_map[i] >= out.threshold ? 1 : 0;
    // 8-connected component labeling by BFS.
    std::vector<int32_t> label(mai_map.size(), -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int64_t start = static_cast<int64_t>(y) * w + x;
            if (!keep[static_cast<size_t>(start)] || label[static_cast<size_t>(start)] >= 0)
                continue;
            StrokeComponent comp;
            comp.min_x = comp.max_x = x;
            comp.min_y = comp.max_y = y;
            std::deque<int64_t> queue{start};
            label[static_cast<size_t>(start)] = static_cast<int32_t>(out.components.size());
            double attn_sum = 0.0;
            while (!queue.empty()) {
                const int64_t p = queue.front();
                queue.pop_front();
                comp.pixels.push_back(p);
                attn_sum += mai_map[static_cast<size_t>(p)];
                const int py = static_cast<int>(p / w), px = static_cast<int>(p % w);
                comp.min_x = std::min(comp.min_x, px);
                comp.max_x = std::max(comp.max_x, px);
                comp.min_y = std::min(comp.min_y, py);
                comp.max_y = std::max(comp.max_y, py);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        const int ny = py + dy, nx = px + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        const int64_t q = static_cast<int64_t>(ny) * w + nx;
                        if (keep[static_cast<size_t>(q)] && label[static_cast<size_t>(q)] < 0) {
                            label[static_cast<size_t>(q)] = label[static_cast<size_t>(start)];
                            queue.push_back(q);
                        }
                    }
            }
            comp.mean_attention = attn_sum / static_cast<double>(comp.pixels.size());
            out.components.push_back(std::move(comp));
        }
    out.components.erase(std::remove_if(out.components.begin(), out.components.end(),
                                        [min_area](const StrokeComponent& c) {
                                            return c.area() < min_area;
                                        }),
                         out.components.end());
    std::stable_sort(out.components.begin(), out.components.end(),
                     [](const StrokeComponent& a, const StrokeComponent& b) {
                         return a.mean_attention > b.mean_attention;
                     });
    if (static_cast<int64_t>(out.components.size()) > top_k)
        out.components.resize(static_cast<size_t>(top_k));
    return out;
}

ImageU8 render_grid(const std::vector<ImageU8>& style_images,
                    const std::vector<SalientStrokeSet>& stroke_sets, const std::string& word,
                    double alpha) {
    if (style_images.size() != stroke_sets.size())
        throw ValueError("render_grid: " + std::to_string(style_images.size()) + " images vs " +
                         std::to_string(stroke_sets.size()) + " stroke sets");
    if (style_images.empty()) throw ValueError("render_grid: no style images");
    const int tile = style_images[0].h;
    const int gap = 8;
    const int caption_h = 40;
    const int n = static_cast<int>(style_images.size());
    const int grid_w = n * tile + (n - 1) * gap;
    ImageU8 out(caption_h + tile, grid_w, 3, 255);
    // Caption: the generated word, rendered with the neutral glyph style.
    if (!word.empty()) {
        SynthStyle caption_style;
        caption_style.thickness = 1;
        Rng rng(0);
        const ImageU8 caption = render_word(word, caption_style, rng);
        for (int y = 0; y < caption.h && y < caption_h; ++y)
            for (int x = 0; x < caption.w && x < grid_w; ++x) {
                const uint8_t v = caption.at(y, x);
                out.at(y + 4, x + 4, 0) = v;
                out.at(y + 4, x + 4, 1) = v;
                out.at(y + 4, x + 4, 2) = v;
            }
    }
    const double highlight[3] = {255.0, 64.0, 64.0};
    for (int i = 0; i < n; ++i) {
        const ImageU8& src = style_images[static_cast<size_t>(i)];
        if (src.h != tile || src.w != tile)
            throw ShapeError("render_grid: style images must share one square size");
        const int ox = i * (tile + gap);
        for (int y = 0; y < tile; ++y)
            for (int x = 0; x < tile; ++x)
                for (int c = 0; c < 3; ++c)
                    out.at(caption_h + y, ox + x, c) =
                        src.channels == 3 ? src.at(y, x, c) : src.at(y, x);
        for (const StrokeComponent& comp : stroke_sets[static_cast<size_t>(i)].components)
            for (int64_t p : comp.pixels) {
                const int y = static_cast<int>(p / tile), x = static_cast<int>(p % tile);
                for (int c = 0; c < 3; ++c) {
                    const double orig = out.at(caption_h + y, ox + x, c);
                    const double v = (1.0 - alpha) * orig + alpha * highlight[c];
                    out.at(caption_h + y, ox + x, c) =
                        static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
                }
            }
    }
    return out;
}

} // namespace ssaa
} // namespace scriptgen
