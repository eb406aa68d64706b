// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/rng.hpp"

namespace scriptgen {

// Parameterized per-writer rendering style for the procedural glyph
// renderer: slant shear angle, stroke thickness, baseline jitter.
struct SynthStyle {
    double shear_deg = 0.0;    // positive leans the stroke tops to the right
    int thickness = 2;         // stamped pen size in px, {1,2,3}
    double jitter_sigma = 0.0; // per-character vertical baseline jitter, px
};

// Stroke-font metrics. Glyphs are authored on a 4x8 unit grid: y=0 is the
// ascender/cap line, y=3 the x-height line, y=6 the baseline, y=8 the
// descender floor. Rendering maps 1 unit -> 4 px, so lines are 32 px tall
// and each character advances 16 px.
constexpr int kGlyphUnitsY = 8;
constexpr double kGlyphScale = 4.0;
constexpr double kGlyphBaselineUnits = 6.0;
constexpr int kCharAdvancePx = 16;
constexpr int kWordMarginPx = 12;

struct GlyphSegment {
    double x0, y0, x1, y1;
};

// Stroke list for one character; every printable ASCII character renders
// (unlisted ones fall back to a deterministic hash-derived scribble).
const std::vector<GlyphSegment>& glyph_strokes(char c);

// Renders one word as dark-on-white grayscale, height 32 px, width
// 16*len + margin. Jitter draws from `rng`; everything else is a pure
// function of (word, style).
ImageU8 render_word(const std::string& word, const SynthStyle& style, Rng& rng);

// Least-squares slope of per-row ink center-of-mass against row height,
// in the same orientation as SynthStyle::shear_deg (tan of the slant
// angle). Test oracle companion to the renderer's shear parameter.
double estimate_shear_slope(const ImageU8& img);

} // namespace scriptgen
