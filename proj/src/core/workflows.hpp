// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"

namespace scriptgen {

// Command-level workflows shared by the C API and (through it) the CLI.
// Every command writes a run_manifest.json next to its primary artifacts
// with the resolved configuration, seeds, checkpoint hash and artifact
// list. Manifests carry timestamps; primary artifacts are byte-stable
// under a repeated seed.

struct SsaaOptions {
    double percentile = 90.0;
    int64_t min_area = 20;
    int64_t top_k = 5;
};

// Writes the synthetic corpus in the manifest.tsv layout (train split plus
// an independent second rendition of each word as the test split).
void run_synth_data(const std::string& words_file, int64_t num_writers, uint64_t seed,
                    const std::string& out_dir);

// Trains from a data root; returns the final checkpoint path.
std::string run_train(const std::string& config_file, const std::string& data_root,
                      const std::string& out_dir);

// Generates one raster per whitespace-separated word of `text`, styled by
// the images found in style_dir. Optionally writes the attention tensor
// container per word.
void run_generate(const std::string& checkpoint, const std::string& text,
                  const std::string& style_dir, uint64_t seed, const std::string& out_dir,
                  bool save_attention);

// SSAA pipeline for one word: grid raster + attention container.
void run_ssaa(const std::string& checkpoint, const std::string& style_dir, const std::string& text,
              uint64_t seed, const std::string& out_dir, const SsaaOptions& opts);

// Metric harness over a data split; writes report.json. extractor is
// "wcn" or "randconv", or "external" with two feature container dirs.
void run_evaluate(const std::string& checkpoint, const std::string& data_root,
                  const std::string& split, const std::string& extractor, uint64_t seed,
                  const std::string& out_path, const std::string& external_generated = "",
                  const std::string& external_reference = "");

} // namespace scriptgen
