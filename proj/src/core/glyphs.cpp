// SPDX-License-Identifier: Apache-2.0
#include "core/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "core/errors.hpp"

namespace scriptgen {

namespace {

using Segs = std::vector<GlyphSegment>;

std::map<char, Segs> build_font() {
    std::map<char, Segs> f;
    // Lowercase: x-height band y in [3,6], ascenders to 0..1, descenders to 8.
    f['a'] = {{1.5, 3, 0, 4.5}, {0, 4.5, 1.5, 6}, {1.5, 6, 3, 4.5}, {3, 4.5, 1.5, 3}, {3, 3, 3, 6}};
    f['b'] = {{0, 0, 0, 6}, {0, 3, 2, 3}, {2, 3, 3, 4.5}, {3, 4.5, 2, 6}, {2, 6, 0, 6}};
    f['c'] = {{3, 3.5, 1, 3}, {1, 3, 0, 4.5}, {0, 4.5, 1, 6}, {1, 6, 3, 5.5}};
    f['d'] = {{3, 0, 3, 6}, {3, 3, 1, 3}, {1, 3, 0, 4.5}, {0, 4.5, 1, 6}, {1, 6, 3, 6}};
    f['e'] = {{0, 4.5, 3, 4.5}, {3, 4.5, 2.5, 3}, {2.5, 3, 1, 3}, {1, 3, 0, 4.5},
              {0, 4.5, 1, 6},   {1, 6, 2.8, 5.6}};
    f['f'] = {{1, 6, 1, 1}, {1, 1, 1.7, 0}, {1.7, 0, 2.5, 0.4}, {0, 3, 2.2, 3}};
    f['g'] = {{1.5, 3, 0, 4.5}, {0, 4.5, 1.5, 6},   {1.5, 6, 3, 4.5}, {3, 4.5, 1.5, 3},
              {3, 3, 3, 7.5},   {3, 7.5, 2, 8}, {2, 8, 0.8, 7.6}};
    f['h'] = {{0, 0, 0, 6}, {0, 4, 1.5, 3}, {1.5, 3, 3, 4}, {3, 4, 3, 6}};
    f['i'] = {{1.5, 2, 1.5, 2.3}, {1.5, 3.2, 1.5, 6}};
    f['j'] = {{1.8, 2, 1.8, 2.3}, {1.8, 3.2, 1.8, 7.5}, {1.8, 7.5, 1, 8}, {1, 8, 0.3, 7.5}};
    f['k'] = {{0, 0, 0, 6}, {2.8, 3, 0, 4.8}, {1, 4.1, 2.8, 6}};
    f['l'] = {{1.5, 0, 1.5, 6}};
    f['m'] = {{0, 3, 0, 6},       {0, 3.6, 0.8, 3}, {0.8, 3, 1.5, 3.6}, {1.5, 3.6, 1.5, 6},
              {1.5, 3.6, 2.3, 3}, {2.3, 3, 3, 3.6}, {3, 3.6, 3, 6}};
    f['n'] = {{0, 3, 0, 6}, {0, 3.8, 1.5, 3}, {1.5, 3, 3, 3.8}, {3, 3.8, 3, 6}};
    f['o'] = {{1.5, 3, 0, 4.5}, {0, 4.5, 1.5, 6}, {1.5, 6, 3, 4.5}, {3, 4.5, 1.5, 3}};
    f['p'] = {{0, 3, 0, 8}, {0, 3, 2, 3}, {2, 3, 3, 4.5}, {3, 4.5, 2, 6}, {2, 6, 0, 6}};
    f['q'] = {{3, 3, 3, 8}, {3, 3, 1, 3}, {1, 3, 0, 4.5}, {0, 4.5, 1, 6}, {1, 6, 3, 6}};
    f['r'] = {{0, 3, 0, 6}, {0, 4, 1, 3.2}, {1, 3.2, 2.2, 3}, {2.2, 3, 2.8, 3.6}};
    f['s'] = {{2.8, 3.4, 1.2, 3}, {1.2, 3, 0.2, 3.9}, {0.2, 3.9, 2.8, 5.1},
              {2.8, 5.1, 1.8, 6}, {1.8, 6, 0.2, 5.6}};
    f['t'] = {{1, 0.8, 1, 5.4}, {1, 5.4, 1.8, 6}, {1.8, 6, 2.6, 5.7}, {0, 3, 2.4, 3}};
    f['u'] = {{0, 3, 0, 5.2}, {0, 5.2, 1.2, 6}, {1.2, 6, 3, 5.2}, {3, 3, 3, 6}};
    f['v'] = {{0, 3, 1.5, 6}, {1.5, 6, 3, 3}};
    f['w'] = {{0, 3, 0.8, 6}, {0.8, 6, 1.5, 3.8}, {1.5, 3.8, 2.2, 6}, {2.2, 6, 3, 3}};
    f['x'] = {{0, 3, 3, 6}, {3, 3, 0, 6}};
    f['y'] = {{0, 3, 1.4, 5.8}, {3, 3, 1, 8}, {1, 8, 0.4, 7.6}};
    f['z'] = {{0, 3, 2.8, 3}, {2.8, 3, 0, 6}, {0, 6, 2.8, 6}};
    // Uppercase: cap band y in [0,6].
    f['A'] = {{0, 6, 1.5, 0}, {1.5, 0, 3, 6}, {0.7, 3.8, 2.3, 3.8}};
    f['B'] = {{0, 0, 0, 6},     {0, 0, 2, 0},     {2, 0, 2.8, 1.5}, {2.8, 1.5, 2, 3},
              {0, 3, 2, 3},     {2, 3, 3, 4.5},   {3, 4.5, 2, 6},   {0, 6, 2, 6}};
    f['C'] = {{3, 0.7, 1.2, 0}, {1.2, 0, 0, 1.8}, {0, 1.8, 0, 4.2}, {0, 4.2, 1.2, 6},
              {1.2, 6, 3, 5.3}};
    f['D'] = {{0, 0, 0, 6}, {0, 0, 1.8, 0}, {1.8, 0, 3, 1.8}, {3, 1.8, 3, 4.2},
              {3, 4.2, 1.8, 6}, {1.8, 6, 0, 6}};
    f['E'] = {{0, 0, 0, 6}, {0, 0, 3, 0}, {0, 3, 2.2, 3}, {0, 6, 3, 6}};
    f['F'] = {{0, 0, 0, 6}, {0, 0, 3, 0}, {0, 3, 2.2, 3}};
    f['G'] = {{3, 0.7, 1.2, 0}, {1.2, 0, 0, 1.8}, {0, 1.8, 0, 4.2}, {0, 4.2, 1.2, 6},
              {1.2, 6, 3, 5.3}, {3, 5.3, 3, 3.4}, {3, 3.4, 1.6, 3.4}};
    f['H'] = {{0, 0, 0, 6}, {3, 0, 3, 6}, {0, 3, 3, 3}};
    f['I'] = {{0.6, 0, 2.4, 0}, {1.5, 0, 1.5, 6}, {0.6, 6, 2.4, 6}};
    f['J'] = {{2.4, 0, 2.4, 5}, {2.4, 5, 1.5, 6}, {1.5, 6, 0.4, 5.4}};
    f['K'] = {{0, 0, 0, 6}, {3, 0, 0, 3.6}, {1.2, 2.7, 3, 6}};
    f['L'] = {{0, 0, 0, 6}, {0, 6, 3, 6}};
    f['M'] = {{0, 6, 0, 0}, {0, 0, 1.5, 3.6}, {1.5, 3.6, 3, 0}, {3, 0, 3, 6}};
    f['N'] = {{0, 6, 0, 0}, {0, 0, 3, 6}, {3, 6, 3, 0}};
    f['O'] = {{1.5, 0, 0, 1.8}, {0, 1.8, 0, 4.2}, {0, 4.2, 1.5, 6}, {1.5, 6, 3, 4.2},
              {3, 4.2, 3, 1.8}, {3, 1.8, 1.5, 0}};
    f['P'] = {{0, 0, 0, 6}, {0, 0, 2, 0}, {2, 0, 3, 1.5}, {3, 1.5, 2, 3}, {2, 3, 0, 3}};
    f['Q'] = {{1.5, 0, 0, 1.8}, {0, 1.8, 0, 4.2}, {0, 4.2, 1.5, 6}, {1.5, 6, 3, 4.2},
              {3, 4.2, 3, 1.8}, {3, 1.8, 1.5, 0}, {2, 4.4, 3, 6}};
    f['R'] = {{0, 0, 0, 6}, {0, 0, 2, 0}, {2, 0, 3, 1.5}, {3, 1.5, 2, 3}, {2, 3, 0, 3},
              {1.2, 3, 3, 6}};
    f['S'] = {{2.8, 0.8, 1.2, 0}, {1.2, 0, 0.2, 1.2}, {0.2, 1.2, 2.8, 4.8},
              {2.8, 4.8, 1.6, 6}, {1.6, 6, 0.2, 5.2}};
    f['T'] = {{0, 0, 3, 0}, {1.5, 0, 1.5, 6}};
    f['U'] = {{0, 0, 0, 4.6}, {0, 4.6, 1.5, 6}, {1.5, 6, 3, 4.6}, {3, 4.6, 3, 0}};
    f['V'] = {{0, 0, 1.5, 6}, {1.5, 6, 3, 0}};
    f['W'] = {{0, 0, 0.8, 6}, {0.8, 6, 1.5, 1.6}, {1.5, 1.6, 2.2, 6}, {2.2, 6, 3, 0}};
    f['X'] = {{0, 0, 3, 6}, {3, 0, 0, 6}};
    f['Y'] = {{0, 0, 1.5, 2.8}, {3, 0, 1.5, 2.8}, {1.5, 2.8, 1.5, 6}};
    f['Z'] = {{0, 0, 3, 0}, {3, 0, 0, 6}, {0, 6, 3, 6}};
    // Digits
    f['0'] = {{1.5, 0, 0, 1.8}, {0, 1.8, 0, 4.2}, {0, 4.2, 1.5, 6}, {1.5, 6, 3, 4.2},
              {3, 4.2, 3, 1.8}, {3, 1.8, 1.5, 0}, {2.4, 1, 0.6, 5}};
    f['1'] = {{0.7, 1.2, 1.7, 0}, {1.7, 0, 1.7, 6}, {0.7, 6, 2.7, 6}};
    f['2'] = {{0.2, 1.4, 1.2, 0}, {1.2, 0, 2.6, 0.4}, {2.6, 0.4, 2.8, 1.8}, {2.8, 1.8, 0, 6},
              {0, 6, 3, 6}};
    f['3'] = {{0.3, 0.5, 1.8, 0}, {1.8, 0, 2.8, 1}, {2.8, 1, 1.5, 2.8}, {1.5, 2.8, 2.8, 4.4},
              {2.8, 4.4, 1.6, 6}, {1.6, 6, 0.2, 5.4}};
    f['4'] = {{2.2, 6, 2.2, 0}, {2.2, 0, 0, 4.2}, {0, 4.2, 3, 4.2}};
    f['5'] = {{2.8, 0, 0.3, 0}, {0.3, 0, 0.3, 2.6}, {0.3, 2.6, 1.8, 2.3}, {1.8, 2.3, 2.9, 3.6},
              {2.9, 3.6, 2.3, 5.6}, {2.3, 5.6, 0.8, 6}, {0.8, 6, 0.1, 5.3}};
    f['6'] = {{2.6, 0.3, 1, 0.8}, {1, 0.8, 0.2, 2.6}, {0.2, 2.6, 0.2, 4.6}, {0.2, 4.6, 1.4, 6},
              {1.4, 6, 2.8, 4.8}, {2.8, 4.8, 2.6, 3.4}, {2.6, 3.4, 0.4, 3.4}};
    f['7'] = {{0, 0, 3, 0}, {3, 0, 1, 6}};
    f['8'] = {{1.5, 0, 0.4, 1.5}, {0.4, 1.5, 1.5, 3}, {1.5, 3, 2.6, 1.5}, {2.6, 1.5, 1.5, 0},
              {1.5, 3, 0.2, 4.5}, {0.2, 4.5, 1.5, 6}, {1.5, 6, 2.8, 4.5}, {2.8, 4.5, 1.5, 3}};
    f['9'] = {{0.4, 5.7, 2, 5.2}, {2, 5.2, 2.8, 3.4}, {2.8, 3.4, 2.8, 1.4}, {2.8, 1.4, 1.6, 0},
              {1.6, 0, 0.2, 1.2}, {0.2, 1.2, 0.4, 2.6}, {0.4, 2.6, 2.6, 2.6}};
    // Punctuation
    f[' '] = {};
    f['.'] = {{1.4, 5.7, 1.6, 6}};
    f[','] = {{1.5, 5.6, 1.2, 6.8}};
    f['\''] = {{1.4, 0, 1.2, 1.2}};
    f['"'] = {{1, 0, 0.9, 1}, {2, 0, 1.9, 1}};
    f['-'] = {{0.3, 4.3, 2.7, 4.3}};
    f['!'] = {{1.5, 0, 1.5, 4.4}, {1.4, 5.7, 1.6, 6}};
    f['?'] = {{0.3, 1.2, 1.2, 0}, {1.2, 0, 2.5, 0.3}, {2.5, 0.3, 2.7, 1.6}, {2.7, 1.6, 1.5, 2.8},
              {1.5, 2.8, 1.5, 4.2}, {1.4, 5.7, 1.6, 6}};
    f[':'] = {{1.4, 3.2, 1.6, 3.5}, {1.4, 5.7, 1.6, 6}};
    f[';'] = {{1.4, 3.2, 1.6, 3.5}, {1.5, 5.6, 1.2, 6.8}};
    f['('] = {{2, 0, 1, 1.8}, {1, 1.8, 1, 4.2}, {1, 4.2, 2, 6}};
    f[')'] = {{1, 0, 2, 1.8}, {2, 1.8, 2, 4.2}, {2, 4.2, 1, 6}};
    f['/'] = {{2.6, 0, 0.4, 6}};
    f['\\'] = {{0.4, 0, 2.6, 6}};
    f['+'] = {{0.4, 3.5, 2.6, 3.5}, {1.5, 2.4, 1.5, 4.6}};
    f['='] = {{0.4, 3, 2.6, 3}, {0.4, 4.4, 2.6, 4.4}};
    f['*'] = {{1.5, 1, 1.5, 3}, {0.6, 1.5, 2.4, 2.5}, {2.4, 1.5, 0.6, 2.5}};
    f['#'] = {{1, 1, 0.7, 5}, {2.3, 1, 2, 5}, {0.3, 2.3, 2.8, 2.3}, {0.2, 3.7, 2.7, 3.7}};
    f['&'] = {{2.6, 3.4, 0.8, 6}, {0.8, 6, 0.2, 4.8}, {0.2, 4.8, 2.2, 1.8}, {2.2, 1.8, 1.8, 0.4},
              {1.8, 0.4, 0.7, 0.7}, {0.7, 0.7, 0.5, 2}, {0.5, 2, 2.8, 6}};
    f['@'] = {{1.8, 2.4, 1.2, 3},  {1.2, 3, 1.8, 3.8},  {1.8, 3.8, 2.3, 3.2}, {2.3, 3.2, 1.8, 2.4},
              {2.9, 1.4, 1.6, 0.6}, {1.6, 0.6, 0.4, 1.8}, {0.4, 1.8, 0.5, 4.4}, {0.5, 4.4, 1.8, 5.3},
              {1.8, 5.3, 2.9, 4.8}};
    f['_'] = {{0, 6.8, 3, 6.8}};
    f['<'] = {{2.6, 2, 0.6, 3.6}, {0.6, 3.6, 2.6, 5.2}};
    f['>'] = {{0.6, 2, 2.6, 3.6}, {2.6, 3.6, 0.6, 5.2}};
    f['%'] = {{2.6, 0.4, 0.4, 5.6}, {0.8, 0.4, 0.3, 1},  {0.3, 1, 0.8, 1.6},  {0.8, 1.6, 1.3, 1},
              {1.3, 1, 0.8, 0.4},   {2.2, 4.4, 1.7, 5},  {1.7, 5, 2.2, 5.6},  {2.2, 5.6, 2.7, 5},
              {2.7, 5, 2.2, 4.4}};
    f['['] = {{1.9, 0, 1, 0}, {1, 0, 1, 6}, {1, 6, 1.9, 6}};
    f[']'] = {{1.1, 0, 2, 0}, {2, 0, 2, 6}, {2, 6, 1.1, 6}};
    return f;
}

// Unlisted printable characters get a deterministic pseudo-glyph so any
// charset-valid text renders.
Segs fallback_glyph(char c) {
    Segs segs;
    uint64_t h = splitmix64(0x9d5f ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
    for (int i = 0; i < 3; ++i) {
        const double x0 = 0.2 + 2.6 * ((h = splitmix64(h)) % 1000) / 999.0;
        const double y0 = 0.4 + 5.2 * ((h = splitmix64(h)) % 1000) / 999.0;
        const double x1 = 0.2 + 2.6 * ((h = splitmix64(h)) % 1000) / 999.0;
        const double y1 = 0.4 + 5.2 * ((h = splitmix64(h)) % 1000) / 999.0;
        segs.push_back({x0, y0, x1, y1});
    }
    return segs;
}

void stamp(ImageU8& img, double x, double y, int thickness) {
    const int r0 = thickness / 2;
    const int r1 = (thickness - 1) - r0;
    const int xi = static_cast<int>(std::lround(x));
    const int yi = static_cast<int>(std::lround(y));
    for (int dy = -r0; dy <= r1; ++dy)
        for (int dx = -r0; dx <= r1; ++dx) {
            const int px = xi + dx, py = yi + dy;
            if (px >= 0 && px < img.w && py >= 0 && py < img.h) img.at(py, px) = 0;
        }
}

void draw_segment(ImageU8& img, double x0, double y0, double x1, double y1, int thickness) {
    const double len = std::hypot(x1 - x0, y1 - y0);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.3)));
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        stamp(img, x0 + t * (x1 - x0), y0 + t * (y1 - y0), thickness);
    }
}

} // namespace

const std::vector<GlyphSegment>& glyph_strokes(char c) {
    static const std::map<char, Segs> font = build_font();
    auto it = font.find(c);
    if (it != font.end()) return it->second;
    static std::map<char, Segs> fallback_cache;
    auto fit = fallback_cache.find(c);
    if (fit == fallback_cache.end()) fit = fallback_cache.emplace(c, fallback_glyph(c)).first;
    return fit->second;
}

ImageU8 render_word(const std::string& word, const SynthStyle& style, Rng& rng) {
    if (word.empty()) throw ValueError("render_word: empty word");
    const int h = static_cast<int>(kGlyphUnitsY * kGlyphScale);
    const int w = kCharAdvancePx * static_cast<int>(word.size()) + kWordMarginPx;
    ImageU8 img(h, w, 1, 255);
    const double shear = std::tan(style.shear_deg * M_PI / 180.0);
    const double baseline_px = kGlyphBaselineUnits * kGlyphScale;
    double pen_x = 4.0;
    for (char c : word) {
        const double jitter = style.jitter_sigma > 0.0 ? rng.normal(0.0, style.jitter_sigma) : 0.0;
        for (const GlyphSegment& s : glyph_strokes(c)) {
            const double y0 = s.y0 * kGlyphScale + jitter;
            const double y1 = s.y1 * kGlyphScale + jitter;
            const double x0 = pen_x + s.x0 * kGlyphScale + shear * (baseline_px - y0);
            const double x1 = pen_x + s.x1 * kGlyphScale + shear * (baseline_px - y1);
            draw_segment(img, x0, y0, x1, y1, style.thickness);
        }
        pen_x += kCharAdvancePx;
    }
    return img;
}

double estimate_shear_slope(const ImageU8& img) {
    // Row center-of-mass of ink vs height above baseline; a sheared word
    // drifts linearly, so the fitted slope recovers tan(shear).
    const ImageU8 g = grayscale(img);
    const double baseline_px = kGlyphBaselineUnits * kGlyphScale;
    std::vector<double> hs, xs;
    for (int y = 0; y < g.h; ++y) {
        double mass = 0.0, moment = 0.0;
        for (int x = 0; x < g.w; ++x) {
            const double ink = (255.0 - g.at(y, x)) / 255.0;
            mass += ink;
            moment += ink * x;
        }
        if (mass > 1e-9) {
            hs.push_back(baseline_px - y);
            xs.push_back(moment / mass);
        }
    }
    if (hs.size() < 2) return 0.0;
    double mh = 0.0, mx = 0.0;
    for (size_t i = 0; i < hs.size(); ++i) {
        mh += hs[i];
        mx += xs[i];
    }
    mh /= static_cast<double>(hs.size());
    mx /= static_cast<double>(hs.size());
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < hs.size(); ++i) {
        num += (hs[i] - mh) * (xs[i] - mx);
        den += (hs[i] - mh) * (hs[i] - mh);
    }
    return den > 1e-12 ? num / den : 0.0;
}

} // namespace scriptgen
