// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any criterion fails. Criterion 9 drives the installed CLI binary
// (path via --cli or the SCRIPTGEN_CLI environment variable).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/corpus.hpp"
#include "core/critics.hpp"
#include "core/generator.hpp"
#include "core/metrics.hpp"
#include "core/ssaa.hpp"
#include "core/trainer.hpp"
#include "../gradcheck.hpp"

using namespace scriptgen;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::vector<std::string> failures;
    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            failures.push_back(what);
        }
    }
};

std::string g_cli_path;

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("scriptgen_accept_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig desk_model_config() {
    RunConfig cfg;
    cfg.model.image_size = 112; // fits word images up to 6 characters
    cfg.model.patch_size = 16;
    cfg.model.vit_embed = 32;
    cfg.model.vit_depth = 2;
    cfg.model.vit_heads = 4;
    cfg.model.vit_mlp_ratio = 2.0;
    cfg.model.d_model = 64;
    cfg.model.fusion_layers = 2;
    cfg.model.fusion_heads = 4;
    cfg.model.fusion_ffn = 128;
    cfg.model.synth_base_channels = 32;
    cfg.model.disc_base_channels = 8;
    cfg.model.tr_base_channels = 8;
    cfg.model.tr_hidden = 32;
    cfg.model.max_text_len = 8;
    cfg.train.batch_size = 4;
    cfg.train.lr_g = 1e-4;
    cfg.train.lr_d = 2e-4;
    cfg.train.lr_tr = 1e-3;
    cfg.train.lr_wcn = 3e-4;
    cfg.train.grad_clip = 5.0;
    return cfg;
}

std::vector<std::string> desk_words() {
    return {"the", "and", "for", "not", "you", "all", "can", "her"};
}

// ---------------------------------------------------------------------
// 1. Shape pipeline at default dims, shrunken depth, < 30 s on CPU.
void criterion_shapes(Check& c) {
    const auto start = std::chrono::steady_clock::now();
    ModelConfig cfg;
    cfg.vit_depth = 1;
    CharsetTokenizer tok;
    Generator gen(cfg, tok, 1234);
    CharsetTokenizer tok2;
    Dataset corpus = generate_synthetic_corpus(2, {"ab", "cd", "ef"}, 3, tok2);
    std::vector<StyleSampleSet> styles = {sample_style_set(corpus, 0, 5, 1),
                                          sample_style_set(corpus, 1, 5, 2)};
    AttentionTrace trace;
    NoGradGuard ng;
    GeneratorOutput out = gen.forward(styles, {"ab", "ab"}, &trace);
    c.expect(out.memory.memory.shape() == Shape{980, 2, 512},
             "StyleMemory shape != (980,2,512): " + shape_str(out.memory.memory.shape()));
    c.expect(out.query.query.shape() == Shape{2, 2, 512},
             "ContentQuery shape != (2,2,512): " + shape_str(out.query.query.shape()));
    c.expect(out.fused.shape() == Shape{2, 2, 512},
             "FusedSequence shape != (2,2,512): " + shape_str(out.fused.shape()));
    AttentionRecord rec = trace.record_for(0, trace.num_layers() - 1, "ab", out.memory.provenance);
    c.expect(rec.weights.shape() == Shape{8, 2, 980},
             "AttentionRecord shape != (8,2,980): " + shape_str(rec.weights.shape()));
    c.expect(out.images.shape() == Shape{2, 1, 32, 32},
             "images shape != (2,1,32,16*2): " + shape_str(out.images.shape()));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 30.0, "pipeline took " + std::to_string(secs) + " s (budget 30)");

    // Attention rows of every recorded layer are distributions (part of
    // criterion 2's surface as well; checked here on the real pipeline).
    for (int layer = 0; layer < trace.num_layers(); ++layer) {
        const Tensor& a = trace.layer(layer);
        const int64_t rows = a.numel() / a.dim(3);
        for (int64_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            bool nonneg = true;
            for (int64_t l = 0; l < a.dim(3); ++l) {
                const double v = a.at(r * a.dim(3) + l);
                sum += v;
                nonneg = nonneg && v >= 0.0;
            }
            if (!(std::abs(sum - 1.0) < 1e-5 && nonneg)) {
                c.expect(false, "attention row not a distribution (layer " +
                                    std::to_string(layer) + ")");
                return;
            }
        }
    }
}

// ---------------------------------------------------------------------
// 2. Attention invariants: row sums and the triple-loop averaging oracle.
void criterion_attention(Check& c) {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const int64_t H = 1 + static_cast<int64_t>(rng.next_below(4));
        const int64_t K = 1 + static_cast<int64_t>(rng.next_below(5));
        const int64_t L = 2 + static_cast<int64_t>(rng.next_below(16));
        Tensor a = Tensor::zeros({H, K, L});
        for (int64_t hk = 0; hk < H * K; ++hk) {
            double sum = 0.0;
            for (int64_t l = 0; l < L; ++l) {
                const double v = rng.uniform(1e-6, 1.0);
                a.at(hk * L + l) = v;
                sum += v;
            }
            for (int64_t l = 0; l < L; ++l) a.at(hk * L + l) /= sum;
        }
        AttentionRecord rec;
        rec.weights = a;
        const auto avg = ssaa::average_attention(rec);
        double total = 0.0;
        for (int64_t l = 0; l < L; ++l) {
            double oracle = 0.0;
            for (int64_t h = 0; h < H; ++h)
                for (int64_t k = 0; k < K; ++k) oracle += a.at((h * K + k) * L + l);
            oracle /= static_cast<double>(H * K);
            if (std::abs(avg.values[static_cast<size_t>(l)] - oracle) >= 1e-7) {
                c.expect(false, "average_attention deviates from the triple-loop oracle");
                return;
            }
            total += avg.values[static_cast<size_t>(l)];
        }
        c.expect(std::abs(total - 1.0) < 1e-5, "averaged attention mass != 1");
    }
}

// ---------------------------------------------------------------------
// 3. Loss oracles: hinge exact values, CTC vs exhaustive alignments, CE.
double ctc_exhaustive(const Tensor& logits, const std::vector<int64_t>& target, int64_t blank) {
    const int64_t T = logits.dim(0), C = logits.dim(1);
    std::vector<std::vector<double>> p(static_cast<size_t>(T),
                                       std::vector<double>(static_cast<size_t>(C)));
    for (int64_t t = 0; t < T; ++t) {
        double mx = logits.at(t * C);
        for (int64_t ch = 1; ch < C; ++ch) mx = std::max(mx, logits.at(t * C + ch));
        double z = 0.0;
        for (int64_t ch = 0; ch < C; ++ch) z += std::exp(logits.at(t * C + ch) - mx);
        for (int64_t ch = 0; ch < C; ++ch)
            p[static_cast<size_t>(t)][static_cast<size_t>(ch)] =
                std::exp(logits.at(t * C + ch) - mx) / z;
    }
    double total = 0.0;
    const auto paths =
        static_cast<int64_t>(std::pow(static_cast<double>(C), static_cast<double>(T)));
    std::vector<int64_t> path(static_cast<size_t>(T));
    for (int64_t code = 0; code < paths; ++code) {
        int64_t rem = code;
        double prob = 1.0;
        for (int64_t t = 0; t < T; ++t) {
            path[static_cast<size_t>(t)] = rem % C;
            rem /= C;
            prob *= p[static_cast<size_t>(t)][static_cast<size_t>(path[static_cast<size_t>(t)])];
        }
        std::vector<int64_t> collapsed;
        for (int64_t t = 0; t < T; ++t) {
            if (t > 0 && path[static_cast<size_t>(t)] == path[static_cast<size_t>(t - 1)]) continue;
            if (path[static_cast<size_t>(t)] != blank)
                collapsed.push_back(path[static_cast<size_t>(t)]);
        }
        if (collapsed == target) total += prob;
    }
    return -std::log(total);
}

void criterion_losses(Check& c) {
    c.expect(hinge_generator_loss(Tensor::from_data({1}, {2.0})).value() == -2.0,
             "hinge G [2.0] != -2.0");
    c.expect(hinge_generator_loss(Tensor::from_data({2}, {1.0, -1.0})).value() == 0.0,
             "hinge G [1,-1] != 0");
    c.expect(std::abs(hinge_generator_loss(Tensor::from_data({3}, {0.3, 0.5, -0.2})).value() +
                      0.2) < 1e-15,
             "hinge G [0.3,0.5,-0.2] != -0.2");
    c.expect(hinge_discriminator_loss(Tensor::from_data({1}, {2.0}),
                                      Tensor::from_data({1}, {-3.0}))
                     .value() == 0.0,
             "hinge D satisfied margins != 0");
    c.expect(hinge_discriminator_loss(Tensor::from_data({1}, {0.0}),
                                      Tensor::from_data({1}, {0.0}))
                     .value() == 2.0,
             "hinge D zero scores != 2");
    c.expect(std::abs(hinge_discriminator_loss(Tensor::from_data({2}, {0.5, 1.5}),
                                               Tensor::from_data({1}, {-0.5}))
                          .value() -
                      0.75) < 1e-15,
             "hinge D mixed case != 0.75");

    Rng rng(31);
    const int64_t blank = 3;
    std::vector<std::vector<int64_t>> targets;
    for (int64_t a = 0; a < 3; ++a) {
        targets.push_back({a});
        for (int64_t b = 0; b < 3; ++b) {
            targets.push_back({a, b});
            for (int64_t d = 0; d < 3; ++d) targets.push_back({a, b, d});
        }
    }
    for (int64_t T = 1; T <= 5; ++T)
        for (const auto& target : targets) {
            int64_t repeats = 0;
            for (size_t i = 1; i < target.size(); ++i)
                if (target[i] == target[i - 1]) ++repeats;
            if (T < static_cast<int64_t>(target.size()) + repeats) continue;
            Tensor logits = Tensor::randn({T, 4}, rng);
            const double got = ctc_loss_single(logits, target, blank).value();
            const double want = ctc_exhaustive(logits, target, blank);
            if (std::abs(got - want) >= 1e-6) {
                c.expect(false, "CTC deviates from the exhaustive oracle at T=" +
                                    std::to_string(T));
                return;
            }
        }

    Rng ce_rng(32);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor logits = Tensor::randn({3, 6}, ce_rng);
        std::vector<int64_t> labels = {1, 0, 5};
        double want = 0.0;
        for (int64_t b = 0; b < 3; ++b) {
            double mx = logits.at(b * 6);
            for (int64_t k = 1; k < 6; ++k) mx = std::max(mx, logits.at(b * 6 + k));
            double z = 0.0;
            for (int64_t k = 0; k < 6; ++k) z += std::exp(logits.at(b * 6 + k) - mx);
            want += mx + std::log(z) - logits.at(b * 6 + labels[static_cast<size_t>(b)]);
        }
        want /= 3.0;
        const double got = cross_entropy_loss(logits, labels).value();
        c.expect(std::abs(got - want) < 1e-7, "cross-entropy deviates from -log-softmax oracle");
    }
}

// ---------------------------------------------------------------------
// 4. Finite-difference gradient checks (decoder layer, tiny style encoder).
void criterion_gradients(Check& c) {
    {
        ModelConfig cfg;
        cfg.d_model = 8;
        cfg.fusion_layers = 1;
        cfg.fusion_heads = 2;
        cfg.fusion_ffn = 16;
        cfg.vit_embed = 8;
        cfg.vit_heads = 2;
        cfg.synth_base_channels = 16;
        nn::ParamRegistry reg;
        Rng rng(41);
        FusionCore core(cfg, reg, rng);
        Rng data(42);
        Tensor q = Tensor::randn({3, 2, 8}, data).set_requires_grad(true);
        Tensor m = Tensor::randn({5, 2, 8}, data).set_requires_grad(true);
        Tensor w = Tensor::rand_uniform({3, 2, 8}, data, -1.0, 1.0);
        ContentQuery query;
        query.query = q;
        query.valid.assign(6, 1);
        query.lengths = {3, 3};
        StyleMemory mem;
        mem.memory = m;
        auto loss = [&] { return ops::sum_all(ops::mul(core.fuse(query, mem, nullptr), w)); };
        Rng pick(43);
        for (Tensor* t : {&q, &m}) {
            const auto r = testutil::finite_difference_check(loss, *t, 14, pick, 1e-5, 1e-3);
            c.expect(r.ok, "decoder layer FD check failed: " + r.detail);
        }
        for (const char* name :
             {"fusion_core.layer0.cross_attn.wk.weight", "fusion_core.layer0.fc2.weight"}) {
            const auto r =
                testutil::finite_difference_check(loss, reg.get(name), 8, pick, 1e-5, 1e-3);
            c.expect(r.ok, std::string("decoder param FD failed (") + name + "): " + r.detail);
        }
    }
    {
        ModelConfig cfg;
        cfg.image_size = 224;
        cfg.patch_size = 56;
        cfg.vit_embed = 8;
        cfg.vit_depth = 1;
        cfg.vit_heads = 2;
        cfg.vit_mlp_ratio = 2.0;
        cfg.d_model = 8;
        cfg.fusion_heads = 2;
        nn::ParamRegistry reg;
        Rng rng(44);
        StyleEncoder enc(cfg, reg, rng);
        Rng img_rng(45);
        StyleSampleSet set;
        for (int n = 0; n < 5; ++n) {
            ImageU8 img(224, 224, 3);
            for (auto& p : img.px) p = static_cast<uint8_t>(img_rng.next_below(256));
            set.images.push_back(std::move(img));
        }
        Tensor images = StyleEncoder::stack_style_sets({set}, cfg);
        images.set_requires_grad(true);
        Tensor w = Tensor::rand_uniform({static_cast<int64_t>(cfg.style_len()), 1, 8}, img_rng,
                                        -1.0, 1.0);
        auto loss = [&] { return ops::sum_all(ops::mul(enc.encode(images, 1).memory, w)); };
        Rng pick(46);
        const auto r_in = testutil::finite_difference_check(loss, images, 12, pick, 1e-5, 1e-3);
        c.expect(r_in.ok, "style encoder input FD failed: " + r_in.detail);
        for (const char* name : {"style_encoder.patch_embed.weight",
                                 "style_encoder.block0.attn.wv.weight", "style_encoder.proj.weight"}) {
            const auto r =
                testutil::finite_difference_check(loss, reg.get(name), 6, pick, 1e-5, 1e-3);
            c.expect(r.ok, std::string("style encoder param FD failed (") + name + "): " + r.detail);
        }
    }
}

// ---------------------------------------------------------------------
// 5. Training schedule instrumentation over 10 iterations.
void criterion_schedule(Check& c) {
    RunConfig cfg = desk_model_config();
    cfg.model.vit_depth = 1;
    cfg.model.vit_embed = 16;
    cfg.model.d_model = 32;
    cfg.model.fusion_layers = 1;
    cfg.model.fusion_ffn = 64;
    cfg.model.synth_base_channels = 16;
    cfg.model.tr_hidden = 16;
    cfg.train.seed = 51;
    cfg.train.batch_size = 2;
    cfg.train.epochs = 100;
    CharsetTokenizer tok;
    Trainer trainer(generate_synthetic_corpus(2, {"an", "to"}, 9, tok), cfg);
    for (int i = 0; i < 10; ++i) {
        const StepReport r = trainer.step();
        if (r.g_updated)
            c.expect(r.critic_grad_linf_during_g == 0.0,
                     "critic gradient leaked during G update at iteration " +
                         std::to_string(r.iteration));
    }
    c.expect(trainer.g_updates() == 5,
             "G updates over 10 iterations = " + std::to_string(trainer.g_updates()) + " != 5");
    c.expect(trainer.d_updates() == 10, "D updates != 10");
    c.expect(trainer.tr_updates() == 10, "TR updates != 10");
    c.expect(trainer.wcn_updates() == 10, "WCN updates != 10");
}

// ---------------------------------------------------------------------
// 6. Desk-scale overfit: 2 writers x 8 words within 2000 iterations.
void criterion_overfit(Check& c) {
    const auto start = std::chrono::steady_clock::now();
    RunConfig cfg = desk_model_config();
    cfg.train.seed = 61;
    CharsetTokenizer tok;
    Dataset corpus = generate_synthetic_corpus(2, desk_words(), 17, tok);
    Trainer trainer(corpus, cfg);
    std::vector<double> g_losses;
    const int64_t max_iters = 2000;
    double cer = 1.0, acc = 0.0;
    int64_t ran = 0;
    for (int64_t i = 0; i < max_iters; ++i) {
        const StepReport r = trainer.step();
        if (r.g_updated) g_losses.push_back(r.g_total);
        ++ran;
        if (i % 100 == 99) {
            cer = trainer.tr_greedy_cer(corpus);
            acc = trainer.wcn_accuracy(corpus);
            std::fprintf(stderr, "  [overfit] iter %lld cer=%.3f wcn_acc=%.3f g=%.3f\n",
                         static_cast<long long>(i + 1), cer, acc,
                         g_losses.empty() ? 0.0 : g_losses.back());
            // Stop once the targets hold and enough G samples exist for a
            // meaningful decile comparison.
            if (cer < 0.05 && acc == 1.0 && g_losses.size() >= 200) break;
        }
    }
    cer = trainer.tr_greedy_cer(corpus);
    acc = trainer.wcn_accuracy(corpus);
    c.expect(ran <= max_iters, "exceeded the iteration budget");
    c.expect(cer < 0.1, "TR greedy CER on training reals = " + std::to_string(cer) + " >= 0.1");
    c.expect(acc == 1.0, "WCN training accuracy = " + std::to_string(acc) + " != 1.0");
    const size_t decile = std::max<size_t>(1, g_losses.size() / 10);
    double first = 0.0, last = 0.0;
    for (size_t i = 0; i < decile; ++i) first += g_losses[i];
    for (size_t i = g_losses.size() - decile; i < g_losses.size(); ++i) last += g_losses[i];
    first /= static_cast<double>(decile);
    last /= static_cast<double>(decile);
    c.expect(first > last, "generator loss did not decrease: first-decile mean " +
                               std::to_string(first) + " <= last-decile mean " +
                               std::to_string(last));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "  [overfit] finished after %lld iterations in %.1f s\n",
                 static_cast<long long>(ran), secs);
    c.expect(secs < 1200.0, "overfit run exceeded 20 minutes");
}

// ---------------------------------------------------------------------
// 7. SSAA oracles.
void criterion_ssaa(Check& c) {
    // Otsu vs exhaustive argmax on 20 random histograms.
    Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int64_t> hist(256, 0);
        for (auto& h : hist) h = static_cast<int64_t>(rng.next_below(40));
        hist[10] += 5;
        double best = -1.0;
        int want = 1;
        for (int t = 1; t <= 255; ++t) {
            double w0 = 0, w1 = 0, s0 = 0, s1 = 0;
            for (int i = 0; i < t; ++i) {
                w0 += static_cast<double>(hist[static_cast<size_t>(i)]);
                s0 += static_cast<double>(i) * static_cast<double>(hist[static_cast<size_t>(i)]);
            }
            for (int i = t; i < 256; ++i) {
                w1 += static_cast<double>(hist[static_cast<size_t>(i)]);
                s1 += static_cast<double>(i) * static_cast<double>(hist[static_cast<size_t>(i)]);
            }
            if (w0 == 0 || w1 == 0) continue;
            const double var = w0 * w1 * (s0 / w0 - s1 / w1) * (s0 / w0 - s1 / w1);
            if (var > best) {
                best = var;
                want = t;
            }
        }
        if (ssaa::otsu_threshold(hist) != want) {
            c.expect(false, "Otsu threshold deviates from the exhaustive argmax");
            break;
        }
    }
    // Connected components vs flood fill.
    for (int trial = 0; trial < 5; ++trial) {
        const int h = 20, w = 20;
        std::vector<double> mai(static_cast<size_t>(h * w), 0.0);
        for (auto& v : mai)
            if (rng.uniform(0.0, 1.0) < 0.3) v = rng.uniform(0.1, 1.0);
        const auto got = ssaa::salient_strokes(mai, h, w, 0.0, 1, 10000);
        std::vector<int> label(static_cast<size_t>(h * w), -1);
        std::set<std::set<int64_t>> want;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (mai[static_cast<size_t>(y * w + x)] <= 0 ||
                    label[static_cast<size_t>(y * w + x)] >= 0)
                    continue;
                std::set<int64_t> comp;
                std::vector<int64_t> stack{y * w + x};
                label[static_cast<size_t>(y * w + x)] = 1;
                while (!stack.empty()) {
                    const int64_t p = stack.back();
                    stack.pop_back();
                    comp.insert(p);
                    const int py = static_cast<int>(p / w), px = static_cast<int>(p % w);
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int ny = py + dy, nx = px + dx;
                            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                            const int64_t q = ny * w + nx;
                            if (mai[static_cast<size_t>(q)] > 0 &&
                                label[static_cast<size_t>(q)] < 0) {
                                label[static_cast<size_t>(q)] = 1;
                                stack.push_back(q);
                            }
                        }
                }
                want.insert(std::move(comp));
            }
        std::set<std::set<int64_t>> got_sets;
        for (const auto& comp : got.components)
            got_sets.insert(std::set<int64_t>(comp.pixels.begin(), comp.pixels.end()));
        if (got_sets != want) {
            c.expect(false, "component labeling deviates from the flood-fill oracle");
            break;
        }
    }
    // Delta-attention placement.
    ssaa::WordAttentionVector a;
    a.values.assign(5 * 196, 0.0);
    a.values[0] = 1.0;
    const auto maps = ssaa::reconstruct_maps(a, 5, 14, 224);
    double best = -1.0;
    int64_t best_idx = 0;
    for (size_t i = 0; i < maps.maps[0].size(); ++i)
        if (maps.maps[0][i] > best) {
            best = maps.maps[0][i];
            best_idx = static_cast<int64_t>(i);
        }
    c.expect(best_idx % 224 < 16 && best_idx / 224 < 16,
             "delta attention peak escaped the top-left 16x16 patch");
    for (int n = 1; n < 5; ++n)
        for (double v : maps.maps[static_cast<size_t>(n)])
            if (v != 0.0) {
                c.expect(false, "delta attention leaked into other style images");
                n = 5;
                break;
            }
    // Full-pipeline determinism: identical inputs -> identical grid bytes.
    CharsetTokenizer tok;
    Dataset corpus = generate_synthetic_corpus(1, {"pen", "ink", "jar", "sky", "fog"}, 5, tok);
    StyleSampleSet style = sample_style_set(corpus, 0, 5, 3);
    Rng arng(72);
    Tensor att = Tensor::zeros({2, 3, 5 * 196});
    for (int64_t r = 0; r < 6; ++r) {
        double sum = 0.0;
        for (int64_t l = 0; l < 5 * 196; ++l) {
            const double v = arng.uniform(0.0, 1.0);
            att.at(r * 5 * 196 + l) = v;
            sum += v;
        }
        for (int64_t l = 0; l < 5 * 196; ++l) att.at(r * 5 * 196 + l) /= sum;
    }
    auto run_pipeline = [&]() {
        AttentionRecord rec;
        rec.weights = att;
        rec.word = "pen";
        const auto avg = ssaa::average_attention(rec);
        const auto m = ssaa::reconstruct_maps(avg, 5, 14, 224);
        std::vector<ssaa::SalientStrokeSet> strokes;
        for (int n = 0; n < 5; ++n) {
            const auto mask = ssaa::ink_mask(style.images[static_cast<size_t>(n)]);
            const auto mai = ssaa::masked_attention(m.maps[static_cast<size_t>(n)], mask.mask);
            strokes.push_back(ssaa::salient_strokes(mai, 224, 224, 90.0, 20, 5));
        }
        return ssaa::render_grid(style.images, strokes, "pen");
    };
    const ImageU8 g1 = run_pipeline();
    const ImageU8 g2 = run_pipeline();
    c.expect(g1.px == g2.px, "SSAA grid bytes are not deterministic");
}

// ---------------------------------------------------------------------
// 8. Metric oracles.
void criterion_metrics(Check& c) {
    Rng rng(81);
    // FID(a,a) ~ 0.
    FeatureMatrix f;
    f.n = 80;
    f.dim = 4;
    f.data.resize(static_cast<size_t>(f.n * f.dim));
    for (auto& v : f.data) v = rng.normal();
    c.expect(std::abs(fid(f, f)) < 1e-6, "FID(a,a) exceeds 1e-6");
    // Scalar closed form < 1e-10.
    for (int trial = 0; trial < 30; ++trial) {
        const double mu_a = rng.uniform(-3, 3), mu_b = rng.uniform(-3, 3);
        const double sa = rng.uniform(0.2, 2.0), sb = rng.uniform(0.2, 2.0);
        GaussianStats A{{mu_a}, {sa * sa}}, B{{mu_b}, {sb * sb}};
        const double got = fid_from_stats(A, B);
        const double want = (mu_a - mu_b) * (mu_a - mu_b) + sa * sa + sb * sb - 2 * sa * sb;
        if (std::abs(got - want) >= 1e-10) {
            c.expect(false, "scalar FID closed form error " + std::to_string(std::abs(got - want)));
            break;
        }
    }
    // 2-D Gaussian case converges to 3.0 within ±0.15 at n = 50,000.
    {
        const int64_t n = 50000;
        FeatureMatrix a, b;
        a.n = b.n = n;
        a.dim = b.dim = 2;
        a.data.resize(static_cast<size_t>(2 * n));
        b.data.resize(static_cast<size_t>(2 * n));
        Rng ga(811), gb(812);
        for (int64_t i = 0; i < n; ++i) {
            a.data[static_cast<size_t>(2 * i)] = ga.normal();
            a.data[static_cast<size_t>(2 * i + 1)] = ga.normal();
            b.data[static_cast<size_t>(2 * i)] = 1.0 + 2.0 * gb.normal();
            b.data[static_cast<size_t>(2 * i + 1)] = 2.0 * gb.normal();
        }
        const double sampled = fid(a, b);
        c.expect(std::abs(sampled - 3.0) <= 0.15,
                 "sampled 2-D Gaussian FID " + std::to_string(sampled) + " not within 3.0 +/- 0.15");
    }
    // KID identical-set mean within 3 SE of 0 over 100 trials.
    {
        double sum = 0.0, sumsq = 0.0;
        const int trials = 100;
        Rng krng(813);
        for (int t = 0; t < trials; ++t) {
            FeatureMatrix a, b;
            a.n = b.n = 40;
            a.dim = b.dim = 2;
            a.data.resize(80 * 1);
            b.data.resize(80 * 1);
            a.data.resize(static_cast<size_t>(80));
            b.data.resize(static_cast<size_t>(80));
            for (auto& v : a.data) v = krng.normal();
            for (auto& v : b.data) v = krng.normal();
            const double v = kid(a, b, 40, 1, static_cast<uint64_t>(t));
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / trials;
        const double se = std::sqrt((sumsq / trials - mean * mean) / trials);
        c.expect(std::abs(mean) <= 3.0 * se,
                 "KID identical-distribution mean " + std::to_string(mean) + " outside 3 SE (" +
                     std::to_string(se) + ")");
    }
    // Levenshtein vs recursive oracle, exhaustive for lengths <= 4.
    {
        std::function<int64_t(const std::string&, const std::string&)> rec =
            [&](const std::string& x, const std::string& y) -> int64_t {
            if (x.empty()) return static_cast<int64_t>(y.size());
            if (y.empty()) return static_cast<int64_t>(x.size());
            const int64_t cost = x.back() == y.back() ? 0 : 1;
            return std::min({rec(x.substr(0, x.size() - 1), y) + 1,
                             rec(x, y.substr(0, y.size() - 1)) + 1,
                             rec(x.substr(0, x.size() - 1), y.substr(0, y.size() - 1)) + cost});
        };
        std::vector<std::string> all = {""};
        std::vector<std::string> frontier = {""};
        for (int len = 1; len <= 4; ++len) {
            std::vector<std::string> next;
            for (const auto& s : frontier)
                for (char ch : {'a', 'b', 'c'}) next.push_back(s + ch);
            all.insert(all.end(), next.begin(), next.end());
            frontier = std::move(next);
        }
        for (const auto& x : all)
            for (const auto& y : all)
                if (levenshtein(x, y) != rec(x, y)) {
                    c.expect(false, "Levenshtein deviates from the recursive oracle");
                    return;
                }
    }
}

// ---------------------------------------------------------------------
// 9. End-to-end CLI replay with byte-identical artifacts.
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" + g_cli_path + "\" " + args + " >" + log.string() + " 2>&1";
    return std::system(cmd.c_str());
}

std::map<std::string, std::string> hash_tree(const fs::path& root) {
    std::map<std::string, std::string> hashes;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), root).string();
        if (e.path().filename() == "run_manifest.json") continue; // carries timestamps
        hashes[rel] = fnv1a_file_hex(e.path().string());
    }
    return hashes;
}

void criterion_cli_replay(Check& c) {
    if (g_cli_path.empty()) {
        c.expect(false, "CLI path not provided (use --cli or SCRIPTGEN_CLI)");
        return;
    }
    const fs::path base = temp_dir("cli");
    {
        std::ofstream words(base / "words.txt");
        for (const auto& w : desk_words()) words << w << "\n";
        RunConfig cfg = desk_model_config();
        cfg.model.vit_depth = 1;
        cfg.model.vit_embed = 16;
        cfg.model.d_model = 32;
        cfg.model.fusion_layers = 1;
        cfg.model.fusion_ffn = 64;
        cfg.model.synth_base_channels = 16;
        cfg.model.tr_hidden = 16;
        cfg.train.seed = 91;
        cfg.train.max_iterations = 24;
        std::ofstream cf(base / "train.cfg");
        cf << config_to_text(cfg);
    }
    auto pipeline = [&](const fs::path& dir) -> bool {
        fs::create_directories(dir);
        const std::string words = (base / "words.txt").string();
        const std::string cfg = (base / "train.cfg").string();
        int rc = run_cli("synth-data --words " + words + " --writers 2 --seed 9 --out " +
                             (dir / "data").string(),
                         dir / "synth.log");
        if (rc != 0) return false;
        rc = run_cli("train --config " + cfg + " --data " + (dir / "data").string() + " --out " +
                         (dir / "run").string(),
                     dir / "train.log");
        if (rc != 0) return false;
        // Find the final checkpoint (epoch with the highest index).
        std::string ckpt;
        for (const auto& e : fs::directory_iterator(dir / "run"))
            if (e.path().extension() == ".ckpt" &&
                (ckpt.empty() || e.path().string() > ckpt))
                ckpt = e.path().string();
        if (ckpt.empty()) return false;
        rc = run_cli("generate --ckpt " + ckpt + " --text \"We love Nepal\" --style-dir " +
                         (dir / "data" / "images").string() + " --seed 9 --out " +
                         (dir / "gen").string(),
                     dir / "gen.log");
        if (rc != 0) return false;
        rc = run_cli("ssaa --checkpoint " + ckpt + " --style-dir " +
                         (dir / "data" / "images").string() + " --text scholar --seed 9 --out " +
                         (dir / "ssaa").string(),
                     dir / "ssaa.log");
        if (rc != 0) return false;
        rc = run_cli("evaluate --checkpoint " + ckpt + " --data " + (dir / "data").string() +
                         " --split test --extractor wcn --seed 9 --out " +
                         (dir / "eval" / "report.json").string(),
                     dir / "eval.log");
        return rc == 0;
    };
    const bool ok_a = pipeline(base / "a");
    c.expect(ok_a, "first CLI pipeline run failed (see logs under " + (base / "a").string() + ")");
    const bool ok_b = pipeline(base / "b");
    c.expect(ok_b, "second CLI pipeline run failed");
    if (!ok_a || !ok_b) return;
    for (const char* sub : {"data", "run", "gen", "ssaa", "eval"}) {
        const auto ha = hash_tree(base / "a" / sub);
        const auto hb = hash_tree(base / "b" / sub);
        if (ha != hb) {
            std::string diff;
            for (const auto& [k, v] : ha) {
                auto it = hb.find(k);
                if (it == hb.end() || it->second != v) diff += k + " ";
            }
            for (const auto& [k, v] : hb)
                if (!ha.count(k)) diff += k + " ";
            c.expect(false, std::string("artifacts differ under ") + sub + ": " + diff);
        }
    }
    // Required artifacts exist.
    c.expect(fs::exists(base / "a" / "gen" / "word_0_We.pgm"), "missing generated word raster");
    c.expect(fs::exists(base / "a" / "ssaa" / "ssaa_grid.ppm"), "missing SSAA grid");
    c.expect(fs::exists(base / "a" / "eval" / "report.json"), "missing metric report");
}

struct Criterion {
    int id;
    const char* name;
    std::function<void(Check&)> fn;
};

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2)
        if (std::string(argv[i]) == "--cli") g_cli_path = argv[i + 1];
    if (g_cli_path.empty())
        if (const char* env = std::getenv("SCRIPTGEN_CLI")) g_cli_path = env;

    const std::vector<Criterion> criteria = {
        {1, "shape pipeline (980/512 dims, width rule, < 30 s)", criterion_shapes},
        {2, "attention invariants (row sums, averaging oracle)", criterion_attention},
        {3, "loss oracles (hinge, CTC exhaustive, cross-entropy)", criterion_losses},
        {4, "finite-difference gradient checks", criterion_gradients},
        {5, "training schedule and gradient isolation", criterion_schedule},
        {6, "desk-scale overfit (CER < 0.1, WCN acc 1.0, G loss down)", criterion_overfit},
        {7, "SSAA oracles (Otsu, components, delta placement, determinism)", criterion_ssaa},
        {8, "metric oracles (FID, KID, Levenshtein)", criterion_metrics},
        {9, "end-to-end CLI replay with byte-identical artifacts", criterion_cli_replay},
    };
    int failures = 0;
    for (const auto& cr : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            cr.fn(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s (%.1f s)\n", check.ok ? "PASS" : "FAIL", cr.id, cr.name,
                    secs);
        for (const auto& f : check.failures) std::printf("       - %s\n", f.c_str());
        std::fflush(stdout);
        if (!check.ok) ++failures;
    }
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
