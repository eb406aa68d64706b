// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/charset.hpp"
#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/image.hpp"
#include "core/losses.hpp"
#include "core/nn.hpp"

namespace scriptgen {

// The three critic networks. All consume grayscale images of height 32 in
// [-1, 1] and any width; batches may be ragged, so items are processed
// one by one.

// Realism discriminator: 4 strided conv stages with leaky ReLU, global
// average pooling, linear head to one scalar score per image.
class Discriminator {
public:
    Discriminator(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng);
    // images: each (1, 1, 32, W_i). Returns (B) scores.
    Tensor score(const std::vector<Tensor>& images) const;
    Tensor trunk_features(const Tensor& image) const; // (1, 8*base)

private:
    nn::Conv2d c1_, c2_, c3_, c4_;
    nn::Linear head_;
};

// Text recognizer (CRNN): conv features with total width stride 4, a
// bidirectional recurrent layer, per-frame charset+blank projection.
class Recognizer {
public:
    Recognizer(const ModelConfig& cfg, int64_t num_classes, nn::ParamRegistry& reg, Rng& rng);
    // (1, 1, 32, W) -> (T = floor(floor(W/2)/2), num_classes) frame logits.
    Tensor frame_logits(const Tensor& image) const;
    static int64_t frames_for_width(int64_t w) { return (w / 2) / 2; }
    int64_t num_classes() const { return num_classes_; }

private:
    nn::Conv2d c1_, c2_, c3_, c4_, squash_;
    nn::BiRnn rnn_;
    nn::Linear head_;
    int64_t num_classes_;
};

// Writer classifier: the discriminator trunk shape with a writer-logit
// head (its own parameters).
class WriterClassifier {
public:
    WriterClassifier(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng);
    Tensor logits(const std::vector<Tensor>& images) const; // (B, writer_count)
    Tensor trunk_features(const Tensor& image) const;       // (1, 8*base)
    int64_t writer_count() const { return writer_count_; }

private:
    nn::Conv2d c1_, c2_, c3_, c4_;
    nn::Linear head_;
    int64_t writer_count_;
};

// Converts a word raster to the critics' input layout (1, 1, 32, W).
Tensor word_image_to_input(const ImageU8& img);

} // namespace scriptgen
