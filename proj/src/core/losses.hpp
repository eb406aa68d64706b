// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace scriptgen {

// Hinge adversarial losses. Scores are 1-D (one scalar per image).
// Generator: mean of negated fake scores. Discriminator: margin losses
// pushing real scores >= 1 and fake scores <= -1.
Tensor hinge_generator_loss(const Tensor& d_fake_scores);
Tensor hinge_discriminator_loss(const Tensor& d_real_scores, const Tensor& d_fake_scores);

// CTC negative log-likelihood for one item: logits (T, C) with the blank
// as class C-1, target of symbol ids < blank. Standard forward algorithm
// in log space; gradient via the alpha-beta recursion.
Tensor ctc_loss_single(const Tensor& logits, const std::vector<int64_t>& target, int64_t blank);
// Mean over a batch of ragged items.
Tensor ctc_loss(const std::vector<Tensor>& logits_per_item,
                const std::vector<std::vector<int64_t>>& targets, int64_t blank);

// Mean categorical cross-entropy over softmax of (B, num_classes) logits.
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int64_t>& labels);

// Greedy CTC decoding: per-frame argmax, collapse repeats, drop blanks.
std::vector<int64_t> ctc_greedy_decode(const Tensor& logits, int64_t blank);

} // namespace scriptgen
