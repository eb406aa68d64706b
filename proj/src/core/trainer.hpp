// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/critics.hpp"
#include "core/generator.hpp"

namespace scriptgen {

struct StepReport {
    int64_t iteration{0};
    double l_d{0}, l_tr_real{0}, l_s_real{0}, critic_total{0};
    bool g_updated{false};
    double l_g{0}, l_tr_fake{0}, l_s_fake{0}, g_total{0};
    // Max |grad| seen on any critic parameter while the generator update
    // ran; the gradient-isolation contract keeps this at exactly 0.
    double critic_grad_linf_during_g{0};
};

// Staggered adversarial training: D, TR and WCN update every iteration
// from real images (TR/WCN) and real+fake (D); G updates every
// g_update_period iterations (phase: iterations 0, 2, 4, ... for the
// default period of 2) from the critics' feedback on generated images.
// Determinism: batches and style sets are pure functions of (seed,
// iteration); the only stateful stream (dropout) is checkpointed.
class Trainer {
public:
    Trainer(Dataset corpus, RunConfig cfg);
    // Resume from a checkpoint (config comes from the checkpoint).
    Trainer(Dataset corpus, const std::string& resume_checkpoint);

    StepReport step();
    // Runs epochs (or max_iterations) with per-epoch checkpoints and a
    // JSONL loss log under out_dir. Returns the final checkpoint path.
    std::string fit(const std::string& out_dir);

    void save(const std::string& path) const;

    int64_t iteration() const { return iteration_; }
    int64_t epoch_of(int64_t iteration) const { return iteration / iterations_per_epoch(); }
    int64_t iterations_per_epoch() const;
    int64_t g_updates() const { return g_updates_; }
    int64_t d_updates() const { return d_updates_; }
    int64_t tr_updates() const { return tr_updates_; }
    int64_t wcn_updates() const { return wcn_updates_; }

    Generator& generator() { return *generator_; }
    Recognizer& recognizer() { return *recognizer_; }
    Discriminator& discriminator() { return *discriminator_; }
    WriterClassifier& writer_classifier() { return *writer_classifier_; }
    nn::ParamRegistry& critic_params() { return critic_reg_; }
    const RunConfig& config() const { return cfg_; }
    const nn::Adam& adam_g() const { return adam_g_; }
    const nn::Adam& adam_d() const { return adam_d_; }
    const nn::Adam& adam_tr() const { return adam_tr_; }
    const nn::Adam& adam_wcn() const { return adam_wcn_; }

    // Training-set diagnostics used by the desk-scale overfit gate.
    double tr_greedy_cer(const Dataset& data) const;
    double wcn_accuracy(const Dataset& data) const;

    // Batch composition for a given iteration (deterministic).
    std::vector<int64_t> batch_indices(int64_t iteration) const;
    StyleSampleSet style_set_for(int64_t iteration, int64_t slot, int64_t writer) const;

private:
    void build(const CheckpointData* resume);
    Tensor crop_fake(const Tensor& images, int64_t item, int64_t width) const;

    Dataset corpus_;
    RunConfig cfg_;
    std::unique_ptr<Generator> generator_;
    nn::ParamRegistry critic_reg_;
    std::unique_ptr<Discriminator> discriminator_;
    std::unique_ptr<Recognizer> recognizer_;
    std::unique_ptr<WriterClassifier> writer_classifier_;
    nn::Adam adam_g_, adam_d_, adam_tr_, adam_wcn_;
    Rng train_rng_{0};
    int64_t iteration_{0};
    int64_t g_updates_{0}, d_updates_{0}, tr_updates_{0}, wcn_updates_{0};
    std::vector<std::vector<ImageU8>> writer_images_;
};

} // namespace scriptgen
