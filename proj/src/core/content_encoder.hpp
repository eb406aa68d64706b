// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/charset.hpp"
#include "core/config.hpp"
#include "core/nn.hpp"

namespace scriptgen {

// Content query: character embeddings plus learned absolute positions,
// (K, B, d_model) with K the longest transcription in the batch. `valid`
// is 1 for real positions, 0 for ragged padding.
struct ContentQuery {
    Tensor query;                 // (K, B, d_model)
    std::vector<uint8_t> valid;   // K*B, row-major (k, b)
    std::vector<int64_t> lengths; // per batch item
    std::vector<std::vector<int64_t>> token_ids;
};

class ContentEncoder {
public:
    ContentEncoder(const ModelConfig& cfg, const CharsetTokenizer& tokenizer,
                   nn::ParamRegistry& reg, Rng& rng);

    ContentQuery encode(const std::vector<std::string>& texts) const;

    const CharsetTokenizer& tokenizer() const { return tokenizer_; }

private:
    const ModelConfig& cfg_;
    const CharsetTokenizer& tokenizer_;
    Tensor embed_; // (|symbols|, d_model)
    Tensor pos_;   // (max_text_len, d_model)
};

} // namespace scriptgen
