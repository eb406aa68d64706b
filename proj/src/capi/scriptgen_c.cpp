// SPDX-License-Identifier: Apache-2.0
#include "scriptgen/scriptgen.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/errors.hpp"
#include "core/generator.hpp"
#include "core/checkpoint.hpp"
#include "core/synthesis_head.hpp"
#include "core/workflows.hpp"

using namespace scriptgen;

struct sg_ctx {
    std::string last_error;
};

struct sg_model {
    RunConfig cfg;
    CharsetTokenizer tokenizer;
    std::unique_ptr<Generator> generator;
};

namespace {

void set_error(sg_ctx* ctx, const std::string& msg) {
    if (ctx) ctx->last_error = msg;
}

int map_exception(sg_ctx* ctx) {
    try {
        throw;
    } catch (const CharsetError& e) {
        set_error(ctx, e.what());
        return SG_ERR_CHARSET;
    } catch (const ShapeError& e) {
        set_error(ctx, e.what());
        return SG_ERR_SHAPE;
    } catch (const IoError& e) {
        set_error(ctx, e.what());
        return SG_ERR_IO;
    } catch (const FormatError& e) {
        set_error(ctx, e.what());
        return SG_ERR_FORMAT;
    } catch (const StateError& e) {
        set_error(ctx, e.what());
        return SG_ERR_STATE;
    } catch (const ValueError& e) {
        set_error(ctx, e.what());
        return SG_ERR_INVALID_ARG;
    } catch (const std::exception& e) {
        set_error(ctx, e.what());
        return SG_ERR_INTERNAL;
    } catch (...) {
        set_error(ctx, "unknown error");
        return SG_ERR_INTERNAL;
    }
}

int require(sg_ctx* ctx, bool cond, const char* what) {
    if (cond) return SG_OK;
    set_error(ctx, std::string("missing required argument: ") + what);
    return SG_ERR_INVALID_ARG;
}

} // namespace

extern "C" {

const char* sg_version(void) { return "0.1.0"; }

sg_ctx* sg_ctx_new(void) { return new sg_ctx(); }

void sg_ctx_free(sg_ctx* ctx) { delete ctx; }

const char* sg_last_error(const sg_ctx* ctx) {
    return ctx ? ctx->last_error.c_str() : "null context";
}

int sg_synth_data(sg_ctx* ctx, const char* words_file, int64_t num_writers, uint64_t seed,
                  const char* out_dir) {
    if (int r = require(ctx, words_file, "words_file")) return r;
    if (int r = require(ctx, out_dir, "out_dir")) return r;
    try {
        run_synth_data(words_file, num_writers, seed, out_dir);
        return SG_OK;
    } catch (...) {
        return map_exception(ctx);
    }
}

int sg_train(sg_ctx* ctx, const char* config_file, const char* data_root, const char* out_dir,
             char* final_checkpoint_out, size_t cap) {
    if (int r = require(ctx, config_file, "config_file")) return r;
    if (int r = require(ctx, data_root, "data_root")) return r;
    if (int r = require(ctx, out_dir, "out_dir")) return r;
    try {
        const std::string final_ckpt = run_train(config_file, data_root, out_dir);
        if (final_checkpoint_out && cap > 0) {
            std::strncpy(final_checkpoint_out, final_ckpt.c_str(), cap - 1);
            final_checkpoint_out[cap - 1] = '\0';
        }
        return SG_OK;
    } catch (...) {
        return map_exception(ctx);
    }
}

int sg_generate(sg_ctx* ctx, const char* checkpoint, const char* text, const char* style_dir,
                uint64_t seed, const char* out_dir, int save_attention) {
    if (int r = require(ctx, checkpoint, "checkpoint")) return r;
    if (int r = require(ctx, text, "text")) return r;
    if (int r = require(ctx, style_dir, "style_dir")) return r;
    if (int r = require(ctx, out_dir, "out_dir")) return r;
    try {
        run_generate(checkpoint, text, style_dir, seed, out_dir, save_attention != 0);
        return SG_OK;
    } catch (...) {
        return map_exception(ctx);
    }
}

int sg_ssaa(sg_ctx* ctx, const char* checkpoint, const char* style_dir, const char* text,
            uint64_t seed, const char* out_dir, double percentile, int64_t min_area,
            int64_t top_k) {
    if (int r = require(ctx, checkpoint, "checkpoint")) return r;
    if (int r = require(ctx, style_dir, "style_dir")) return r;
    if (int r = require(ctx, text, "text")) return r;
    if (int r = require(ctx, out_dir, "out_dir")) return r;
    try {
        SsaaOptions opts;
        opts.percentile = percentile;
        opts.min_area = min_area;
        opts.top_k = top_k;
        run_ssaa(checkpoint, style_dir, text, seed, out_dir, opts);
        return SG_OK;
    } catch (...) {
        return map_exception(ctx);
    }
}

int sg_evaluate(sg_ctx* ctx, const char* checkpoint, const char* data_root, const char* split,
                const char* extractor, uint64_t seed, const char* out_path,
                const char* external_generated, const char* external_reference) {
    if (int r = require(ctx, checkpoint, "checkpoint")) return r;
    if (int r = require(ctx, data_root, "data_root")) return r;
    if (int r = require(ctx, split, "split")) return r;
    if (int r = require(ctx, extractor, "extractor")) return r;
    if (int r = require(ctx, out_path, "out_path")) return r;
    try {
        run_evaluate(checkpoint, data_root, split, extractor, seed, out_path,
                     external_generated ? external_generated : "",
                     external_reference ? external_reference : "");
        return SG_OK;
    } catch (...) {
        return map_exception(ctx);
    }
}

int sg_model_load(sg_ctx* ctx, const char* checkpoint, sg_model** out) {
    if (int r = require(ctx, checkpoint, "checkpoint")) return r;
    if (int r = require(ctx, out, "out")) return r;
    try {
        CheckpointData ckpt = load_checkpoint(checkpoint);
        auto model = std::make_unique<sg_model>();
        model->cfg = ckpt.config;
        model->tokenizer = model->cfg.model.charset.empty()
                               ? CharsetTokenizer()
                               : CharsetTokenizer(model->cfg.model.charset);
        model->generator = std::make_unique<Generator>(model->cfg.model, model->tokenizer,
                                                       model->cfg.train.seed);
        load_params_into(ckpt, model->generator->params());
        model->generator->params().set_requires_grad(false);
        *out = model.release();
        return SG_OK;
    } catch (...) {
        return map_exception(ctx);
    }
}

void sg_model_free(sg_model* model) { delete model; }

int sg_model_generate_word(sg_ctx* ctx, sg_model* model, const char* word, const char* style_dir,
                           uint64_t seed, const char* out_image_path) {
    if (int r = require(ctx, model, "model")) return r;
    if (int r = require(ctx, word, "word")) return r;
    if (int r = require(ctx, style_dir, "style_dir")) return r;
    if (int r = require(ctx, out_image_path, "out_image_path")) return r;
    try {
        namespace fsys = std::filesystem;
        std::vector<ImageU8> style_images;
        if (!fsys::is_directory(style_dir)) throw IoError(std::string("style directory not found: ") + style_dir);
        std::vector<std::string> paths;
        for (const auto& e : fsys::directory_iterator(style_dir)) {
            const std::string ext = e.path().extension().string();
            if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm"))
                paths.push_back(e.path().string());
        }
        std::sort(paths.begin(), paths.end());
        if (paths.empty()) throw IoError(std::string("no style images in ") + style_dir);
        for (const auto& p : paths) {
            ImageU8 img = grayscale(load_image(p));
            if (img.h != kWordHeight) img = resize_to_height(img, kWordHeight);
            style_images.push_back(std::move(img));
        }
        StyleSampleSet style =
            style_set_from_images(style_images, 0, model->cfg.model.num_style_images,
                                  mix_seed(seed, 0x9e4, 0), model->cfg.model.image_size);
        NoGradGuard ng;
        GeneratorOutput out = model->generator->forward({style}, {word}, nullptr, false, nullptr);
        save_image(export_generated(out.images, 0, static_cast<int64_t>(std::strlen(word))),
                   out_image_path);
        return SG_OK;
    } catch (...) {
        return map_exception(ctx);
    }
}

} // extern "C"
