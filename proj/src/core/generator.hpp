// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/charset.hpp"
#include "core/config.hpp"
#include "core/content_encoder.hpp"
#include "core/corpus.hpp"
#include "core/fusion_core.hpp"
#include "core/nn.hpp"
#include "core/style_encoder.hpp"
#include "core/synthesis_head.hpp"

namespace scriptgen {

struct GeneratorOutput {
    Tensor images; // (B, 1, 32, 16*Kmax)
    Tensor fused;  // (K, B, d_model)
    ContentQuery query;
    StyleMemory memory;
};

// Style encoder + content encoder + fusion core + synthesis head behind
// one forward call. Owns the parameter registry for the four modules.
class Generator {
public:
    Generator(const ModelConfig& cfg, const CharsetTokenizer& tokenizer, uint64_t seed);

    GeneratorOutput forward(const std::vector<StyleSampleSet>& styles,
                            const std::vector<std::string>& texts, AttentionTrace* trace = nullptr,
                            bool training = false, Rng* rng = nullptr) const;

    const ModelConfig& config() const { return cfg_; }
    const CharsetTokenizer& tokenizer() const { return tokenizer_; }
    nn::ParamRegistry& params() { return reg_; }
    const nn::ParamRegistry& params() const { return reg_; }
    const StyleEncoder& style_encoder() const { return *style_encoder_; }
    const ContentEncoder& content_encoder() const { return *content_encoder_; }
    const FusionCore& fusion_core() const { return *fusion_core_; }
    const SynthesisHead& synthesis_head() const { return *synthesis_head_; }

private:
    ModelConfig cfg_;
    CharsetTokenizer tokenizer_;
    nn::ParamRegistry reg_;
    std::unique_ptr<StyleEncoder> style_encoder_;
    std::unique_ptr<ContentEncoder> content_encoder_;
    std::unique_ptr<FusionCore> fusion_core_;
    std::unique_ptr<SynthesisHead> synthesis_head_;
};

} // namespace scriptgen
