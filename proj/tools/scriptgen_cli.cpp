// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Links only the public C API.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "scriptgen/scriptgen.h"

namespace {

int finish(sg_ctx* ctx, int status, const char* command) {
    if (status != SG_OK)
        std::fprintf(stderr, "scriptgen %s: error (%d): %s\n", command, status,
                     sg_last_error(ctx));
    sg_ctx_free(ctx);
    return status == SG_OK ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scriptgen: styled handwriting generation, analysis and evaluation"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    uint64_t seed = 42;
    app.add_option("--seed", seed, "global RNG seed")->capture_default_str();

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "write a deterministic synthetic glyph corpus");
    std::string words_file, out_dir;
    int64_t writers = 2;
    synth->add_option("--words", words_file, "word list file (whitespace separated)")->required();
    synth->add_option("--writers", writers, "number of synthetic writers")->required();
    synth->add_option("--out", out_dir, "output dataset directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train on a manifest-layout dataset");
    std::string config_file, data_root, train_out;
    train->add_option("--config", config_file, "key=value config file")->required();
    train->add_option("--data", data_root, "dataset root (manifest.tsv layout)")->required();
    train->add_option("--out", train_out, "checkpoint/log output directory")->required();

    // generate
    auto* gen = app.add_subcommand("generate", "synthesize word images in a reference style");
    std::string gen_ckpt, gen_text, gen_style, gen_out;
    bool save_attention = false;
    gen->add_option("--ckpt,--checkpoint", gen_ckpt, "checkpoint file")->required();
    gen->add_option("--text", gen_text, "target text (split on whitespace, one image per word)")
        ->required();
    gen->add_option("--style-dir", gen_style, "directory of style word images (.pgm/.ppm)")
        ->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_flag("--save-attention", save_attention, "also write attention tensor containers");

    // ssaa
    auto* ssaa = app.add_subcommand("ssaa", "salient stroke attention analysis for one word");
    std::string ssaa_ckpt, ssaa_style, ssaa_text, ssaa_out;
    double percentile = 90.0;
    int64_t min_area = 20, top_k = 5;
    ssaa->add_option("--checkpoint,--ckpt", ssaa_ckpt, "checkpoint file")->required();
    ssaa->add_option("--style-dir", ssaa_style, "directory of style word images")->required();
    ssaa->add_option("--text", ssaa_text, "single target word")->required();
    ssaa->add_option("--out", ssaa_out, "output directory")->required();
    ssaa->add_option("--percentile", percentile, "MAI percentile threshold")
        ->capture_default_str();
    ssaa->add_option("--min-area", min_area, "minimum component area, px")->capture_default_str();
    ssaa->add_option("--top-k", top_k, "components kept per image")->capture_default_str();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "FID/KID/delta-CER harness over a data split");
    std::string eval_ckpt, eval_data, eval_split = "test", extractor = "wcn", eval_out;
    std::string ext_gen, ext_ref;
    eval->add_option("--checkpoint,--ckpt", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "dataset root")->required();
    eval->add_option("--split", eval_split, "train|test")->capture_default_str();
    eval->add_option("--extractor", extractor, "feature extractor: wcn|randconv|external")
        ->capture_default_str();
    eval->add_option("--out", eval_out, "report path (JSON)")->required();
    eval->add_option("--external-generated", ext_gen,
                     "feature container dir (extractor=external)");
    eval->add_option("--external-reference", ext_ref,
                     "feature container dir (extractor=external)");

    CLI11_PARSE(app, argc, argv);

    sg_ctx* ctx = sg_ctx_new();
    if (synth->parsed())
        return finish(ctx, sg_synth_data(ctx, words_file.c_str(), writers, seed, out_dir.c_str()),
                      "synth-data");
    if (train->parsed()) {
        char final_ckpt[4096] = {0};
        const int status = sg_train(ctx, config_file.c_str(), data_root.c_str(), train_out.c_str(),
                                    final_ckpt, sizeof(final_ckpt));
        if (status == SG_OK) std::printf("final checkpoint: %s\n", final_ckpt);
        return finish(ctx, status, "train");
    }
    if (gen->parsed())
        return finish(ctx,
                      sg_generate(ctx, gen_ckpt.c_str(), gen_text.c_str(), gen_style.c_str(), seed,
                                  gen_out.c_str(), save_attention ? 1 : 0),
                      "generate");
    if (ssaa->parsed())
        return finish(ctx,
                      sg_ssaa(ctx, ssaa_ckpt.c_str(), ssaa_style.c_str(), ssaa_text.c_str(), seed,
                              ssaa_out.c_str(), percentile, min_area, top_k),
                      "ssaa");
    if (eval->parsed())
        return finish(ctx,
                      sg_evaluate(ctx, eval_ckpt.c_str(), eval_data.c_str(), eval_split.c_str(),
                                  extractor.c_str(), seed, eval_out.c_str(),
                                  ext_gen.empty() ? nullptr : ext_gen.c_str(),
                                  ext_ref.empty() ? nullptr : ext_ref.c_str()),
                      "evaluate");
    sg_ctx_free(ctx);
    return 1;
}
