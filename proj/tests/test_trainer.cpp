// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "core/errors.hpp"
#include "core/trainer.hpp"

using namespace scriptgen;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("trainer");

namespace {

RunConfig desk_config(uint64_t seed = 11) {
    RunConfig cfg;
    cfg.model.image_size = 56;
    cfg.model.patch_size = 14;
    cfg.model.vit_embed = 16;
    cfg.model.vit_depth = 1;
    cfg.model.vit_heads = 2;
    cfg.model.vit_mlp_ratio = 2.0;
    cfg.model.d_model = 32;
    cfg.model.fusion_layers = 1;
    cfg.model.fusion_heads = 4;
    cfg.model.fusion_ffn = 64;
    cfg.model.synth_base_channels = 16;
    cfg.model.disc_base_channels = 8;
    cfg.model.tr_base_channels = 8;
    cfg.model.tr_hidden = 16;
    cfg.model.max_text_len = 8;
    cfg.train.seed = seed;
    cfg.train.batch_size = 2;
    cfg.train.epochs = 1000;
    cfg.train.lr_g = 1e-4;
    cfg.train.lr_d = 2e-4;
    cfg.train.lr_tr = 3e-4;
    cfg.train.lr_wcn = 3e-4;
    return cfg;
}

Dataset desk_corpus() {
    CharsetTokenizer tok;
    return generate_synthetic_corpus(2, {"an", "to"}, 5, tok);
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("scriptgen_trainer_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("generator updates land on iterations 0 and 2 with period 2") {
    Trainer trainer(desk_corpus(), desk_config());
    std::vector<bool> updated;
    for (int i = 0; i < 4; ++i) updated.push_back(trainer.step().g_updated);
    CHECK(updated == std::vector<bool>{true, false, true, false});
    CHECK(trainer.g_updates() == 2);
    CHECK(trainer.d_updates() == 4);
    CHECK(trainer.tr_updates() == 4);
    CHECK(trainer.wcn_updates() == 4);
}

TEST_CASE("critic parameters receive zero gradient from fake-image losses") {
    Trainer trainer(desk_corpus(), desk_config(13));
    for (int i = 0; i < 4; ++i) {
        const StepReport r = trainer.step();
        if (r.g_updated) CHECK(r.critic_grad_linf_during_g == 0.0);
    }
}

TEST_CASE("frozen recognizer is untouched by a generator-side CTC step") {
    // Component-level variant of the isolation contract: a fake-image CTC
    // loss backpropagates into the generator input while the frozen
    // recognizer keeps its parameters and receives no gradient.
    ModelConfig cfg = desk_config().model;
    cfg.writer_count = 2;
    CharsetTokenizer tok;
    nn::ParamRegistry reg;
    Rng rng(17);
    Recognizer tr(cfg, tok.num_classes(), reg, rng);
    const auto before = reg.get("recognizer.c1.weight").data();
    reg.set_requires_grad(false);
    Rng data(18);
    Tensor fake = Tensor::rand_uniform({1, 1, 32, 32}, data, -1.0, 1.0).set_requires_grad(true);
    Tensor loss = ctc_loss({tr.frame_logits(fake)}, {tok.encode("ab")}, tok.blank_index());
    loss.backward();
    CHECK(fake.has_grad());
    double fake_norm = 0.0;
    for (double g : fake.grad()) fake_norm += g * g;
    CHECK(fake_norm > 0.0);
    for (const auto& [name, t] : reg.all()) {
        CHECK_FALSE(t.has_grad());
    }
    CHECK(reg.get("recognizer.c1.weight").data() == before);
}

TEST_CASE("one step on a fixed batch and seed reproduces identical loss reports") {
    Trainer a(desk_corpus(), desk_config(21));
    Trainer b(desk_corpus(), desk_config(21));
    for (int i = 0; i < 3; ++i) {
        const StepReport ra = a.step();
        const StepReport rb = b.step();
        CHECK(ra.l_d == rb.l_d);
        CHECK(ra.l_tr_real == rb.l_tr_real);
        CHECK(ra.l_s_real == rb.l_s_real);
        CHECK(ra.g_updated == rb.g_updated);
        if (ra.g_updated) {
            CHECK(ra.l_g == rb.l_g);
            CHECK(ra.l_tr_fake == rb.l_tr_fake);
            CHECK(ra.l_s_fake == rb.l_s_fake);
        }
    }
}

TEST_CASE("checkpoint resume continues bit-identically") {
    const fs::path dir = temp_dir("resume");
    Trainer a(desk_corpus(), desk_config(23));
    for (int i = 0; i < 3; ++i) a.step();
    const std::string ckpt = (dir / "mid.ckpt").string();
    a.save(ckpt);
    // Continue the original.
    std::vector<StepReport> cont;
    for (int i = 0; i < 3; ++i) cont.push_back(a.step());
    // Resume from disk.
    Trainer b(desk_corpus(), ckpt);
    CHECK(b.iteration() == 3);
    for (int i = 0; i < 3; ++i) {
        const StepReport rb = b.step();
        CHECK(rb.iteration == cont[static_cast<size_t>(i)].iteration);
        CHECK(rb.l_d == cont[static_cast<size_t>(i)].l_d);
        CHECK(rb.l_tr_real == cont[static_cast<size_t>(i)].l_tr_real);
        CHECK(rb.l_s_real == cont[static_cast<size_t>(i)].l_s_real);
        if (rb.g_updated) CHECK(rb.g_total == cont[static_cast<size_t>(i)].g_total);
    }
}

TEST_CASE("fit writes per-epoch checkpoints and a loss log") {
    const fs::path dir = temp_dir("fit");
    RunConfig cfg = desk_config(25);
    cfg.train.max_iterations = 4; // corpus of 4, batch 2 -> 2 iters/epoch
    Trainer trainer(desk_corpus(), cfg);
    const std::string last = trainer.fit(dir.string());
    CHECK(fs::exists(dir / "epoch_1.ckpt"));
    CHECK(fs::exists(dir / "epoch_2.ckpt"));
    CHECK(last == (dir / "epoch_2.ckpt").string());
    std::ifstream log(dir / "loss_log.jsonl");
    REQUIRE(log.good());
    int lines = 0;
    std::string line;
    while (std::getline(log, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 4);
}

TEST_CASE("corpus/charset mismatch fails before training") {
    RunConfig cfg = desk_config();
    cfg.model.charset = "abct"; // corpus contains 'n' and 'o'
    CHECK_THROWS_AS(Trainer(desk_corpus(), cfg), CharsetError);
    RunConfig cfg2 = desk_config();
    cfg2.model.writer_count = 5; // corpus has 2
    CHECK_THROWS_AS(Trainer(desk_corpus(), cfg2), ValueError);
    Dataset empty;
    CHECK_THROWS_AS(Trainer(empty, desk_config()), ValueError);
}

TEST_CASE("adam uses the configured betas and update counts") {
    RunConfig cfg = desk_config(27);
    Trainer trainer(desk_corpus(), cfg);
    trainer.step();
    trainer.step();
    CHECK(trainer.adam_g().beta1() == cfg.train.adam_beta1);
    CHECK(trainer.adam_g().beta2() == cfg.train.adam_beta2);
    CHECK(trainer.adam_g().step_count() == 1);  // one G update in two iterations
    CHECK(trainer.adam_d().step_count() == 2);
    CHECK(trainer.adam_tr().step_count() == 2);
    CHECK(trainer.adam_wcn().step_count() == 2);
}

TEST_CASE("short run drives the real-image recognizer loss down") {
    RunConfig cfg = desk_config(29);
    Trainer trainer(desk_corpus(), cfg);
    double first = 0.0, last = 0.0;
    const int total = 60;
    for (int i = 0; i < total; ++i) {
        const StepReport r = trainer.step();
        if (i < 5) first += r.l_tr_real;
        if (i >= total - 5) last += r.l_tr_real;
    }
    CHECK(last < first);
}

TEST_SUITE_END();
