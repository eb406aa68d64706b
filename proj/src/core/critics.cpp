// SPDX-License-Identifier: Apache-2.0
#include "core/critics.hpp"

#include "core/errors.hpp"

namespace scriptgen {

namespace {
void check_input(const Tensor& img) {
    if (img.ndim() != 4 || img.dim(0) != 1 || img.dim(1) != 1 || img.dim(2) != kWordHeight)
        throw ShapeError("critic input must be (1,1," + std::to_string(kWordHeight) +
                         ",W), got " + shape_str(img.shape()));
    if (img.dim(3) < 16) throw ShapeError("critic input narrower than 16 px");
}
} // namespace

Discriminator::Discriminator(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng) {
    const int64_t c = cfg.disc_base_channels;
    c1_ = nn::Conv2d(reg, "discriminator.c1", 1, c, 3, 3, 2, 2, 1, 1, rng);
    c2_ = nn::Conv2d(reg, "discriminator.c2", c, 2 * c, 3, 3, 2, 2, 1, 1, rng);
    c3_ = nn::Conv2d(reg, "discriminator.c3", 2 * c, 4 * c, 3, 3, 2, 2, 1, 1, rng);
    c4_ = nn::Conv2d(reg, "discriminator.c4", 4 * c, 8 * c, 3, 3, 2, 2, 1, 1, rng);
    head_ = nn::Linear(reg, "discriminator.head", 8 * c, 1, rng);
}

Tensor Discriminator::trunk_features(const Tensor& image) const {
    check_input(image);
    Tensor x = ops::leaky_relu(c1_.forward(image), 0.2);
    x = ops::leaky_relu(c2_.forward(x), 0.2);
    x = ops::leaky_relu(c3_.forward(x), 0.2);
    x = ops::leaky_relu(c4_.forward(x), 0.2);
    return ops::global_mean_hw(x); // (1, 8c)
}

Tensor Discriminator::score(const std::vector<Tensor>& images) const {
    if (images.empty()) throw ValueError("discriminate: empty batch");
    std::vector<Tensor> scores;
    scores.reserve(images.size());
    for (const Tensor& img : images)
        scores.push_back(ops::reshape(head_.forward(trunk_features(img)), {1}));
    return ops::concat_dim0(scores); // (B)
}

Recognizer::Recognizer(const ModelConfig& cfg, int64_t num_classes, nn::ParamRegistry& reg,
                       Rng& rng)
    : num_classes_(num_classes) {
    const int64_t c = cfg.tr_base_channels;
    c1_ = nn::Conv2d(reg, "recognizer.c1", 1, c, 3, 3, 1, 1, 1, 1, rng);
    c2_ = nn::Conv2d(reg, "recognizer.c2", c, 2 * c, 3, 3, 1, 1, 1, 1, rng);
    c3_ = nn::Conv2d(reg, "recognizer.c3", 2 * c, 4 * c, 3, 3, 1, 1, 1, 1, rng);
    c4_ = nn::Conv2d(reg, "recognizer.c4", 4 * c, 4 * c, 3, 3, 1, 1, 1, 1, rng);
    // Height 2 -> 1 with a (2,1) valid conv after the four pools.
    squash_ = nn::Conv2d(reg, "recognizer.squash", 4 * c, 4 * c, 2, 1, 1, 1, 0, 0, rng);
    rnn_ = nn::BiRnn(reg, "recognizer.rnn", 4 * c, cfg.tr_hidden, rng);
    head_ = nn::Linear(reg, "recognizer.head", 2 * cfg.tr_hidden, num_classes, rng);
}

namespace {
// (C, T) -> (T, 1, C): channel columns become recurrent frames.
Tensor channels_to_frames(const Tensor& seq) {
    const int64_t C = seq.dim(0), T = seq.dim(1);
    std::vector<double> out(static_cast<size_t>(C * T));
    for (int64_t c = 0; c < C; ++c)
        for (int64_t t = 0; t < T; ++t)
            out[static_cast<size_t>(t * C + c)] = seq.at(c * T + t);
    return ops::make_op_node({T, 1, C}, std::move(out), {seq},
                             [seq, C, T](TensorImpl& self) mutable {
                                 if (!seq.needs_grad()) return;
                                 auto& dst = seq.grad_mutable();
                                 for (int64_t c = 0; c < C; ++c)
                                     for (int64_t t = 0; t < T; ++t)
                                         dst[static_cast<size_t>(c * T + t)] +=
                                             self.grad[static_cast<size_t>(t * C + c)];
                             });
}
} // namespace

Tensor Recognizer::frame_logits(const Tensor& image) const {
    check_input(image);
    Tensor x = ops::maxpool2d(ops::relu(c1_.forward(image)), 2, 2); // 16 x W/2
    x = ops::maxpool2d(ops::relu(c2_.forward(x)), 2, 2);            // 8 x W/4
    x = ops::maxpool2d(ops::relu(c3_.forward(x)), 2, 1);            // 4 x W/4
    x = ops::maxpool2d(ops::relu(c4_.forward(x)), 2, 1);            // 2 x W/4
    x = ops::relu(squash_.forward(x));                              // (1, 4c, 1, T)
    const int64_t C = x.dim(1), T = x.dim(3);
    Tensor frames = channels_to_frames(ops::reshape(x, {C, T})); // (T, 1, C)
    Tensor rnn_out = rnn_.forward(frames);                       // (T, 1, 2h)
    return ops::reshape(head_.forward(rnn_out), {T, num_classes_});
}

WriterClassifier::WriterClassifier(const ModelConfig& cfg, nn::ParamRegistry& reg, Rng& rng)
    : writer_count_(cfg.writer_count) {
    if (writer_count_ < 1) throw ValueError("writer classifier: writer_count must be >= 1");
    const int64_t c = cfg.disc_base_channels;
    c1_ = nn::Conv2d(reg, "writer_classifier.c1", 1, c, 3, 3, 2, 2, 1, 1, rng);
    c2_ = nn::Conv2d(reg, "writer_classifier.c2", c, 2 * c, 3, 3, 2, 2, 1, 1, rng);
    c3_ = nn::Conv2d(reg, "writer_classifier.c3", 2 * c, 4 * c, 3, 3, 2, 2, 1, 1, rng);
    c4_ = nn::Conv2d(reg, "writer_classifier.c4", 4 * c, 8 * c, 3, 3, 2, 2, 1, 1, rng);
    head_ = nn::Linear(reg, "writer_classifier.head", 8 * c, writer_count_, rng);
}

Tensor WriterClassifier::trunk_features(const Tensor& image) const {
    check_input(image);
    Tensor x = ops::leaky_relu(c1_.forward(image), 0.2);
    x = ops::leaky_relu(c2_.forward(x), 0.2);
    x = ops::leaky_relu(c3_.forward(x), 0.2);
    x = ops::leaky_relu(c4_.forward(x), 0.2);
    return ops::global_mean_hw(x);
}

Tensor WriterClassifier::logits(const std::vector<Tensor>& images) const {
    if (images.empty()) throw ValueError("classify_writer: empty batch");
    std::vector<Tensor> rows;
    rows.reserve(images.size());
    for (const Tensor& img : images) rows.push_back(head_.forward(trunk_features(img)));
    return ops::concat_dim0(rows); // (B, writer_count)
}

Tensor word_image_to_input(const ImageU8& img) {
    const ImageU8 gray = grayscale(img);
    Tensor t = Tensor::zeros({1, 1, gray.h, gray.w});
    for (int y = 0; y < gray.h; ++y)
        for (int x = 0; x < gray.w; ++x)
            t.at(static_cast<int64_t>(y) * gray.w + x) = gray.at(y, x) / 127.5 - 1.0;
    return t;
}

} // namespace scriptgen
