// SPDX-License-Identifier: Apache-2.0
#include "core/generator.hpp"

#include "core/errors.hpp"

namespace scriptgen {

Generator::Generator(const ModelConfig& cfg, const CharsetTokenizer& tokenizer, uint64_t seed)
    : cfg_(cfg), tokenizer_(tokenizer) {
    cfg_.validate();
    Rng rng(mix_seed(seed, 0x6e9));
    style_encoder_ = std::make_unique<StyleEncoder>(cfg_, reg_, rng);
    content_encoder_ = std::make_unique<ContentEncoder>(cfg_, tokenizer_, reg_, rng);
    fusion_core_ = std::make_unique<FusionCore>(cfg_, reg_, rng);
    synthesis_head_ = std::make_unique<SynthesisHead>(cfg_, reg_, rng);
}

GeneratorOutput Generator::forward(const std::vector<StyleSampleSet>& styles,
                                   const std::vector<std::string>& texts, AttentionTrace* trace,
                                   bool training, Rng* rng) const {
    if (styles.size() != texts.size())
        throw ValueError("generator: style set count != text count");
    if (styles.empty()) throw ValueError("generator: empty batch");
    GeneratorOutput out;
    Tensor stacked = StyleEncoder::stack_style_sets(styles, cfg_);
    out.memory = style_encoder_->encode(stacked, static_cast<int64_t>(styles.size()));
    out.query = content_encoder_->encode(texts);
    out.fused = fusion_core_->fuse(out.query, out.memory, trace, training, rng);
    out.images = synthesis_head_->synthesize(out.fused, out.query.valid);
    return out;
}

} // namespace scriptgen
