// SPDX-License-Identifier: Apache-2.0
#include "core/content_encoder.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace scriptgen {

ContentEncoder::ContentEncoder(const ModelConfig& cfg, const CharsetTokenizer& tokenizer,
                               nn::ParamRegistry& reg, Rng& rng)
    : cfg_(cfg), tokenizer_(tokenizer) {
    embed_ = reg.add("content_encoder.embed",
                     Tensor::randn({tokenizer.size(), cfg.d_model}, rng, 0.02));
    pos_ = reg.add("content_encoder.pos", Tensor::randn({cfg.max_text_len, cfg.d_model}, rng, 0.02));
}

ContentQuery ContentEncoder::encode(const std::vector<std::string>& texts) const {
    if (texts.empty()) throw ValueError("encode_content: empty batch");
    const int64_t B = static_cast<int64_t>(texts.size());
    int64_t K = 0;
    ContentQuery q;
    q.lengths.reserve(static_cast<size_t>(B));
    q.token_ids.reserve(static_cast<size_t>(B));
    for (const auto& t : texts) {
        if (t.empty()) throw ValueError("encode_content: empty text");
        if (static_cast<int>(t.size()) > cfg_.max_text_len)
            throw ValueError("encode_content: text longer than max_text_len (" +
                             std::to_string(cfg_.max_text_len) + "): '" + t + "'");
        q.token_ids.push_back(tokenizer_.encode(t)); // throws CharsetError with the character
        q.lengths.push_back(static_cast<int64_t>(t.size()));
        K = std::max(K, q.lengths.back());
    }
    // Padded slots reuse token id 0; the mask removes them from losses and
    // attention pooling downstream.
    std::vector<int64_t> ids(static_cast<size_t>(K * B), 0);
    q.valid.assign(static_cast<size_t>(K * B), 0);
    for (int64_t b = 0; b < B; ++b)
        for (int64_t k = 0; k < q.lengths[static_cast<size_t>(b)]; ++k) {
            ids[static_cast<size_t>(k * B + b)] = q.token_ids[static_cast<size_t>(b)][static_cast<size_t>(k)];
            q.valid[static_cast<size_t>(k * B + b)] = 1;
        }
    Tensor emb = ops::embedding(embed_, ids, {K, B}); // (K, B, d_model)
    Tensor pos = ops::slice_dim0(pos_, 0, K);
    q.query = ops::add_pos_embed(emb, pos);
    return q;
}

} // namespace scriptgen
