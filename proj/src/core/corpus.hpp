// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/charset.hpp"
#include "core/glyphs.hpp"
#include "core/image.hpp"
#include "core/rng.hpp"

namespace scriptgen {

// One word image: grayscale, height exactly 32 px, non-empty charset-valid
// transcription, contiguous writer id.
struct WordSample {
    ImageU8 image;
    std::string transcription;
    int64_t writer{0};
};

constexpr int kWordHeight = 32;

// N preprocessed reference images (3-channel, image_size x image_size,
// white-padded) for one writer.
struct StyleSampleSet {
    std::vector<ImageU8> images;
    int64_t writer{0};
    std::vector<int64_t> picked_indices; // source sample index of each pick
};

struct Dataset {
    std::vector<WordSample> samples;
    int64_t writer_count{0};
    int64_t skipped_unreadable{0};
    int64_t skipped_charset{0};
    int64_t warnings() const { return skipped_unreadable + skipped_charset; }

    std::vector<int64_t> samples_of_writer(int64_t w) const;
};

// Pastes a word image top-left onto a white canvas and triplicates the
// gray channel. No scaling or cropping: inputs wider or taller than the
// canvas are rejected.
ImageU8 preprocess_style_image(const ImageU8& raw, int target = 224);

// Loads the manifest layout: root/manifest.tsv with tab-separated columns
// `relative_path  transcription  writer_key  split`. Writer keys are
// remapped to contiguous ids in order of first appearance across the whole
// manifest. Unreadable images and out-of-charset transcriptions are
// skipped and counted.
Dataset load_words(const std::string& root, const std::string& split,
                   const CharsetTokenizer& tokenizer);

// Deterministic synthetic corpus: `num_writers` parameterized styles
// (shear, thickness, baseline jitter; pairwise distinct) applied to the
// procedural glyph renderer, one sample per (writer, word). `rendition`
// selects an independent jitter stream so held-out copies of the same
// words can be produced.
Dataset generate_synthetic_corpus(int64_t num_writers, const std::vector<std::string>& words,
                                  uint64_t seed, const CharsetTokenizer& tokenizer,
                                  uint64_t rendition = 0);
SynthStyle synthetic_writer_style(uint64_t seed, int64_t writer, int64_t num_writers);

// Samples n style references for one writer (without replacement when the
// writer has >= n images, with replacement otherwise) and preprocesses
// them to the encoder resolution.
StyleSampleSet sample_style_set(const Dataset& data, int64_t writer, int n, uint64_t seed,
                                int image_size = 224);
StyleSampleSet style_set_from_images(const std::vector<ImageU8>& images, int64_t writer, int n,
                                     uint64_t seed, int image_size = 224);

// Writes a dataset in the manifest layout (images as PGM under images/).
void write_dataset(const Dataset& data, const std::string& root,
                   const std::vector<std::string>& splits_per_sample);

} // namespace scriptgen
