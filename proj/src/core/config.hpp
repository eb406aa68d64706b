// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace scriptgen {

// Model topology. Defaults are the full-size geometry: ViT-Small style
// encoder (patch 16, embed 384, depth 12, heads 6), 512-d fusion with 3
// decoder layers of 8 heads. Desk-scale runs shrink these via config keys.
struct ModelConfig {
    int image_size = 224;
    int patch_size = 16;
    int64_t vit_embed = 384;
    int vit_depth = 12;
    int64_t vit_heads = 6;
    double vit_mlp_ratio = 4.0;

    int64_t d_model = 512;
    int fusion_layers = 3;
    int64_t fusion_heads = 8;
    int64_t fusion_ffn = 2048;
    double fusion_dropout = 0.1;

    int max_text_len = 32;
    int num_style_images = 5;

    // Synthesis head: 8 x 2K grid at synth_base_channels, two 2x upsample
    // stages, one width-doubling transposed conv; 16 px of width per token.
    int64_t synth_base_channels = 256;

    // Critics
    int64_t disc_base_channels = 32;
    int64_t tr_base_channels = 32;
    int64_t tr_hidden = 128;

    int64_t writer_count = 0; // set from the dataset before training

    std::string charset; // empty = printable ASCII

    int patches_per_side() const { return image_size / patch_size; }
    int patches_per_image() const { return patches_per_side() * patches_per_side(); }
    int style_len() const { return num_style_images * patches_per_image(); }

    void validate() const;
};

struct TrainConfig {
    uint64_t seed = 42;
    int epochs = 30;
    int64_t batch_size = 16;
    double lr_g = 5e-5;
    double lr_d = 5e-5;
    double lr_tr = 5e-5;
    double lr_wcn = 5e-5;
    double adam_beta1 = 0.0;
    double adam_beta2 = 0.999;
    int g_update_period = 2;
    double grad_clip = 0.0;      // 0 disables clipping
    int64_t max_iterations = 0;  // 0 = run all epochs
    bool style_resample_per_batch = true;
    int checkpoint_every_epochs = 1;

    void validate() const;
};

// Flat `key = value` config file shared by the trainer and the CLI.
// Lines starting with '#' are comments; unknown keys are errors.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string config_to_text(const RunConfig& cfg);
std::map<std::string, std::string> config_to_map(const RunConfig& cfg);
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

} // namespace scriptgen
