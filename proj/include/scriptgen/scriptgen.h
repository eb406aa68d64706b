/* SPDX-License-Identifier: Apache-2.0 */
#ifndef SCRIPTGEN_H
#define SCRIPTGEN_H

/*
 * C API for the scriptgen styled-handwriting toolkit.
 *
 * All functions return SG_OK (0) on success or a nonzero sg_status; the
 * human-readable message for the most recent failure is kept per context
 * and read with sg_last_error(). Handles are opaque; free them with the
 * matching *_free call.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SG_API __declspec(dllexport)
#else
#define SG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sg_status {
    SG_OK = 0,
    SG_ERR_INVALID_ARG = 1,
    SG_ERR_IO = 2,
    SG_ERR_FORMAT = 3,
    SG_ERR_CHARSET = 4,
    SG_ERR_SHAPE = 5,
    SG_ERR_STATE = 6,
    SG_ERR_INTERNAL = 7
} sg_status;

typedef struct sg_ctx sg_ctx;     /* library context: error slot */
typedef struct sg_model sg_model; /* loaded generator checkpoint */

SG_API const char* sg_version(void);

SG_API sg_ctx* sg_ctx_new(void);
SG_API void sg_ctx_free(sg_ctx* ctx);
SG_API const char* sg_last_error(const sg_ctx* ctx);

/* Writes a deterministic synthetic corpus (manifest.tsv layout; train
 * split plus an independent test rendition of each word). */
SG_API int sg_synth_data(sg_ctx* ctx, const char* words_file, int64_t num_writers, uint64_t seed,
                         const char* out_dir);

/* Trains from the manifest layout under data_root using a key=value
 * config file. Writes per-epoch checkpoints and a loss log to out_dir;
 * the final checkpoint path is copied into final_checkpoint_out (may be
 * NULL) truncated to cap bytes. */
SG_API int sg_train(sg_ctx* ctx, const char* config_file, const char* data_root,
                    const char* out_dir, char* final_checkpoint_out, size_t cap);

/* Generates one raster per whitespace-separated word in text, using style
 * reference images (.pgm/.ppm word images) from style_dir. */
SG_API int sg_generate(sg_ctx* ctx, const char* checkpoint, const char* text,
                       const char* style_dir, uint64_t seed, const char* out_dir,
                       int save_attention);

/* Salient-stroke attention analysis for one word: annotated grid raster
 * plus the attention tensor container. */
SG_API int sg_ssaa(sg_ctx* ctx, const char* checkpoint, const char* style_dir, const char* text,
                   uint64_t seed, const char* out_dir, double percentile, int64_t min_area,
                   int64_t top_k);

/* Metric harness (FID, KID, delta-CER) over a data split; writes a JSON
 * report to out_path. extractor: "wcn", "randconv", or "external" with
 * two feature-container directories (else pass NULL). */
SG_API int sg_evaluate(sg_ctx* ctx, const char* checkpoint, const char* data_root,
                       const char* split, const char* extractor, uint64_t seed,
                       const char* out_path, const char* external_generated,
                       const char* external_reference);

/* Repeated-generation handle. */
SG_API int sg_model_load(sg_ctx* ctx, const char* checkpoint, sg_model** out);
SG_API void sg_model_free(sg_model* model);
SG_API int sg_model_generate_word(sg_ctx* ctx, sg_model* model, const char* word,
                                  const char* style_dir, uint64_t seed,
                                  const char* out_image_path);

#ifdef __cplusplus
}
#endif

#endif /* SCRIPTGEN_H */
