// SPDX-License-Identifier: Apache-2.0
#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/metrics.hpp"

namespace fs = std::filesystem;

namespace scriptgen {

namespace {

std::vector<Tensor> partition_params(const nn::ParamRegistry& reg, const std::string& prefix,
                                     std::vector<std::string>* names = nullptr) {
    std::vector<Tensor> out;
    for (const auto& [name, t] : reg.all())
        if (prefix.empty() || name.rfind(prefix, 0) == 0) {
            out.push_back(t);
            if (names) names->push_back(name);
        }
    return out;
}

void check_finite(double v, const char* component) {
    if (!std::isfinite(v))
        throw ValueError(std::string("training step aborted: non-finite ") + component);
}

} // namespace

Trainer::Trainer(Dataset corpus, RunConfig cfg) : corpus_(std::move(corpus)), cfg_(std::move(cfg)) {
    build(nullptr);
}

Trainer::Trainer(Dataset corpus, const std::string& resume_checkpoint)
    : corpus_(std::move(corpus)) {
    CheckpointData ckpt = load_checkpoint(resume_checkpoint);
    cfg_ = ckpt.config;
    build(&ckpt);
}

void Trainer::build(const CheckpointData* resume) {
    if (corpus_.samples.empty()) throw ValueError("trainer: corpus is empty");
    cfg_.train.validate();
    CharsetTokenizer tokenizer =
        cfg_.model.charset.empty() ? CharsetTokenizer() : CharsetTokenizer(cfg_.model.charset);
    // Corpus/charset agreement comes first; a mid-training encode error
    // would waste the whole run.
    for (const auto& s : corpus_.samples) {
        if (s.transcription.empty()) throw ValueError("trainer: sample with empty transcription");
        for (char c : s.transcription)
            if (!tokenizer.contains(c))
                throw CharsetError("trainer: corpus transcription '" + s.transcription +
                                   "' not representable in the configured charset");
        if (static_cast<int>(s.transcription.size()) > cfg_.model.max_text_len)
            throw ValueError("trainer: transcription longer than max_text_len: '" +
                             s.transcription + "'");
    }
    if (cfg_.model.writer_count == 0) cfg_.model.writer_count = corpus_.writer_count;
    if (cfg_.model.writer_count != corpus_.writer_count)
        throw ValueError("trainer: config writer_count " + std::to_string(cfg_.model.writer_count) +
                         " != corpus writer_count " + std::to_string(corpus_.writer_count));
    cfg_.model.validate();

    writer_images_.assign(static_cast<size_t>(corpus_.writer_count), {});
    for (const auto& s : corpus_.samples)
        writer_images_[static_cast<size_t>(s.writer)].push_back(s.image);
    for (int64_t w = 0; w < corpus_.writer_count; ++w)
        if (writer_images_[static_cast<size_t>(w)].empty())
            throw ValueError("trainer: writer " + std::to_string(w) + " has no samples");

    generator_ = std::make_unique<Generator>(cfg_.model, tokenizer, cfg_.train.seed);
    Rng critic_rng(mix_seed(cfg_.train.seed, 0xc417));
    discriminator_ = std::make_unique<Discriminator>(cfg_.model, critic_reg_, critic_rng);
    recognizer_ = std::make_unique<Recognizer>(cfg_.model, tokenizer.num_classes(), critic_reg_,
                                               critic_rng);
    writer_classifier_ = std::make_unique<WriterClassifier>(cfg_.model, critic_reg_, critic_rng);

    const TrainConfig& t = cfg_.train;
    adam_g_ = nn::Adam(generator_->params().tensors(), t.lr_g, t.adam_beta1, t.adam_beta2);
    adam_d_ = nn::Adam(partition_params(critic_reg_, "discriminator."), t.lr_d, t.adam_beta1,
                       t.adam_beta2);
    adam_tr_ = nn::Adam(partition_params(critic_reg_, "recognizer."), t.lr_tr, t.adam_beta1,
                        t.adam_beta2);
    adam_wcn_ = nn::Adam(partition_params(critic_reg_, "writer_classifier."), t.lr_wcn,
                         t.adam_beta1, t.adam_beta2);
    train_rng_ = Rng(mix_seed(t.seed, 0xd20));

    if (resume) {
        load_params_into(*resume, generator_->params());
        load_params_into(*resume, critic_reg_);
        iteration_ = resume->iteration;
        auto restore_adam = [&](nn::Adam& adam, const std::string& prefix, const std::string& key) {
            std::vector<std::string> names;
            partition_params(prefix == "generator" ? generator_->params() : critic_reg_,
                             prefix == "generator" ? "" : prefix, &names);
            for (size_t i = 0; i < names.size(); ++i) {
                auto mi = resume->adam_m.find(names[i]);
                auto vi = resume->adam_v.find(names[i]);
                if (mi == resume->adam_m.end() || vi == resume->adam_v.end())
                    throw FormatError("checkpoint missing optimizer state for " + names[i]);
                adam.moments_m()[i] = mi->second;
                adam.moments_v()[i] = vi->second;
            }
            auto ti = resume->adam_steps.find(key);
            if (ti != resume->adam_steps.end()) adam.set_step_count(ti->second);
        };
        restore_adam(adam_g_, "generator", "g");
        restore_adam(adam_d_, "discriminator.", "d");
        restore_adam(adam_tr_, "recognizer.", "tr");
        restore_adam(adam_wcn_, "writer_classifier.", "wcn");
        auto ri = resume->rng_states.find("train");
        if (ri != resume->rng_states.end()) train_rng_.deserialize(ri->second);
        // Update cadence counters follow from the iteration index.
        d_updates_ = tr_updates_ = wcn_updates_ = iteration_;
        g_updates_ = (iteration_ + cfg_.train.g_update_period - 1) / cfg_.train.g_update_period;
    }
}

int64_t Trainer::iterations_per_epoch() const {
    const auto n = static_cast<int64_t>(corpus_.samples.size());
    return (n + cfg_.train.batch_size - 1) / cfg_.train.batch_size;
}

std::vector<int64_t> Trainer::batch_indices(int64_t iteration) const {
    const auto n = static_cast<int64_t>(corpus_.samples.size());
    const int64_t per_epoch = iterations_per_epoch();
    const int64_t epoch = iteration / per_epoch;
    const int64_t it = iteration % per_epoch;
    std::vector<int64_t> perm(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    Rng rng(mix_seed(cfg_.train.seed, 0x0b5e, static_cast<uint64_t>(epoch)));
    for (int64_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(i + 1)));
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(cfg_.train.batch_size));
    for (int64_t k = 0; k < cfg_.train.batch_size; ++k)
        out.push_back(perm[static_cast<size_t>((it * cfg_.train.batch_size + k) % n)]);
    return out;
}

StyleSampleSet Trainer::style_set_for(int64_t iteration, int64_t slot, int64_t writer) const {
    const uint64_t seed = cfg_.train.style_resample_per_batch
                              ? mix_seed(cfg_.train.seed, 0x571e + static_cast<uint64_t>(iteration),
                                         static_cast<uint64_t>(slot))
                              : mix_seed(cfg_.train.seed, 0x571e, static_cast<uint64_t>(writer));
    return style_set_from_images(writer_images_[static_cast<size_t>(writer)], writer,
                                 cfg_.model.num_style_images, seed, cfg_.model.image_size);
}

Tensor Trainer::crop_fake(const Tensor& images, int64_t item, int64_t width) const {
    const int64_t H = images.dim(2), W = images.dim(3);
    std::vector<double> out(static_cast<size_t>(H * width));
    for (int64_t y = 0; y < H; ++y)
        std::copy_n(images.data().data() + (item * H + y) * W, width, out.data() + y * width);
    return ops::make_op_node({1, 1, H, width}, std::move(out), {images},
                             [images, item, width, H, W](TensorImpl& self) mutable {
                                 if (!images.needs_grad()) return;
                                 auto& dst = images.grad_mutable();
                                 for (int64_t y = 0; y < H; ++y)
                                     for (int64_t x = 0; x < width; ++x)
                                         dst[static_cast<size_t>((item * H + y) * W + x)] +=
                                             self.grad[static_cast<size_t>(y * width + x)];
                             });
}

StepReport Trainer::step() {
    const CharsetTokenizer& tokenizer = generator_->tokenizer();
    const auto batch = batch_indices(iteration_);
    const auto B = static_cast<int64_t>(batch.size());
    std::vector<Tensor> real_inputs;
    std::vector<std::string> texts;
    std::vector<int64_t> writers;
    std::vector<std::vector<int64_t>> targets;
    std::vector<StyleSampleSet> styles;
    for (int64_t i = 0; i < B; ++i) {
        const WordSample& s = corpus_.samples[static_cast<size_t>(batch[static_cast<size_t>(i)])];
        real_inputs.push_back(word_image_to_input(s.image));
        texts.push_back(s.transcription);
        writers.push_back(s.writer);
        targets.push_back(tokenizer.encode(s.transcription));
        styles.push_back(style_set_for(iteration_, i, s.writer));
    }

    StepReport report;
    report.iteration = iteration_;
    const bool g_turn = iteration_ % cfg_.train.g_update_period == 0;

    // Generated batch. On G iterations the graph is kept and reused for
    // the generator update after the critics step.
    GeneratorOutput gen;
    if (g_turn) {
        gen = generator_->forward(styles, texts, nullptr, true, &train_rng_);
    } else {
        NoGradGuard ng;
        gen = generator_->forward(styles, texts, nullptr, true, &train_rng_);
    }
    Tensor fake_detached = gen.images.detach();

    // Critics update: L_D from real and fake scores, CTC and writer CE on
    // real images only.
    std::vector<Tensor> fake_inputs_detached;
    for (int64_t i = 0; i < B; ++i)
        fake_inputs_detached.push_back(
            crop_fake(fake_detached, i, SynthesisHead::kWidthPerToken * gen.query.lengths[static_cast<size_t>(i)]));
    Tensor d_real = discriminator_->score(real_inputs);
    Tensor d_fake = discriminator_->score(fake_inputs_detached);
    Tensor l_d = hinge_discriminator_loss(d_real, d_fake);
    std::vector<Tensor> tr_logits;
    for (const Tensor& img : real_inputs) tr_logits.push_back(recognizer_->frame_logits(img));
    Tensor l_tr_real = ctc_loss(tr_logits, targets, tokenizer.blank_index());
    Tensor l_s_real = cross_entropy_loss(writer_classifier_->logits(real_inputs), writers);
    Tensor critic_total = ops::add(ops::add(l_d, l_tr_real), l_s_real);
    report.l_d = l_d.value();
    report.l_tr_real = l_tr_real.value();
    report.l_s_real = l_s_real.value();
    report.critic_total = critic_total.value();
    check_finite(report.l_d, "L_D");
    check_finite(report.l_tr_real, "L_TR(real)");
    check_finite(report.l_s_real, "L_S(real)");
    critic_total.backward();
    if (cfg_.train.grad_clip > 0) {
        adam_d_.clip_grad_norm(cfg_.train.grad_clip);
        adam_tr_.clip_grad_norm(cfg_.train.grad_clip);
        adam_wcn_.clip_grad_norm(cfg_.train.grad_clip);
    }
    adam_d_.step();
    adam_tr_.step();
    adam_wcn_.step();
    ++d_updates_;
    ++tr_updates_;
    ++wcn_updates_;
    critic_reg_.zero_grad();
    generator_->params().zero_grad();

    if (g_turn) {
        // Generator update. Critic parameters are frozen: their losses on
        // fake images steer G only ("trained solely on real images").
        critic_reg_.set_requires_grad(false);
        std::vector<Tensor> fake_inputs;
        for (int64_t i = 0; i < B; ++i)
            fake_inputs.push_back(crop_fake(
                gen.images, i, SynthesisHead::kWidthPerToken * gen.query.lengths[static_cast<size_t>(i)]));
        Tensor l_g = hinge_generator_loss(discriminator_->score(fake_inputs));
        std::vector<Tensor> tr_fake;
        for (const Tensor& img : fake_inputs) tr_fake.push_back(recognizer_->frame_logits(img));
        Tensor l_tr_fake = ctc_loss(tr_fake, targets, tokenizer.blank_index());
        Tensor l_s_fake = cross_entropy_loss(writer_classifier_->logits(fake_inputs), writers);
        Tensor g_total = ops::add(ops::add(l_g, l_tr_fake), l_s_fake);
        report.l_g = l_g.value();
        report.l_tr_fake = l_tr_fake.value();
        report.l_s_fake = l_s_fake.value();
        report.g_total = g_total.value();
        check_finite(report.l_g, "L_G");
        check_finite(report.l_tr_fake, "L_TR(fake)");
        check_finite(report.l_s_fake, "L_S(fake)");
        g_total.backward();
        double linf = 0.0;
        for (const auto& [name, t] : critic_reg_.all())
            if (t.has_grad())
                for (double g : t.grad()) linf = std::max(linf, std::abs(g));
        report.critic_grad_linf_during_g = linf;
        if (cfg_.train.grad_clip > 0) adam_g_.clip_grad_norm(cfg_.train.grad_clip);
        adam_g_.step();
        ++g_updates_;
        report.g_updated = true;
        critic_reg_.set_requires_grad(true);
        critic_reg_.zero_grad();
        generator_->params().zero_grad();
    }

    ++iteration_;
    return report;
}

std::string Trainer::fit(const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "loss_log.jsonl",
                      iteration_ > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open loss log under " + out_dir);
    const int64_t per_epoch = iterations_per_epoch();
    const int64_t total = cfg_.train.max_iterations > 0
                              ? cfg_.train.max_iterations
                              : per_epoch * cfg_.train.epochs;
    std::string last_path;
    while (iteration_ < total) {
        const StepReport r = step();
        nlohmann::json j;
        j["iteration"] = r.iteration;
        j["l_d"] = r.l_d;
        j["l_tr_real"] = r.l_tr_real;
        j["l_s_real"] = r.l_s_real;
        j["critic_total"] = r.critic_total;
        j["g_updated"] = r.g_updated;
        if (r.g_updated) {
            j["l_g"] = r.l_g;
            j["l_tr_fake"] = r.l_tr_fake;
            j["l_s_fake"] = r.l_s_fake;
            j["g_total"] = r.g_total;
        }
        log << j.dump() << "\n";
        const bool epoch_end = iteration_ % per_epoch == 0;
        const int64_t epoch = iteration_ / per_epoch;
        if ((epoch_end && epoch % std::max(1, cfg_.train.checkpoint_every_epochs) == 0) ||
            iteration_ >= total) {
            last_path = (fs::path(out_dir) / ("epoch_" + std::to_string(epoch) + ".ckpt")).string();
            save(last_path);
        }
    }
    log.flush();
    return last_path;
}

void Trainer::save(const std::string& path) const {
    CheckpointData data;
    data.config = cfg_;
    data.iteration = iteration_;
    data.epoch = iteration_ / iterations_per_epoch();
    for (const auto& [name, t] : generator_->params().all()) data.params.emplace(name, t.detach());
    for (const auto& [name, t] : critic_reg_.all()) data.params.emplace(name, t.detach());
    auto dump_adam = [&](const nn::Adam& adam, const nn::ParamRegistry& reg,
                         const std::string& prefix, const std::string& key) {
        std::vector<std::string> names;
        partition_params(reg, prefix, &names);
        auto& m = const_cast<nn::Adam&>(adam).moments_m();
        auto& v = const_cast<nn::Adam&>(adam).moments_v();
        for (size_t i = 0; i < names.size(); ++i) {
            data.adam_m[names[i]] = m[i];
            data.adam_v[names[i]] = v[i];
        }
        data.adam_steps[key] = adam.step_count();
    };
    dump_adam(adam_g_, generator_->params(), "", "g");
    dump_adam(adam_d_, critic_reg_, "discriminator.", "d");
    dump_adam(adam_tr_, critic_reg_, "recognizer.", "tr");
    dump_adam(adam_wcn_, critic_reg_, "writer_classifier.", "wcn");
    data.rng_states["train"] = train_rng_.serialize();
    save_checkpoint(path, data);
}

double Trainer::tr_greedy_cer(const Dataset& data) const {
    NoGradGuard ng;
    const CharsetTokenizer& tokenizer = generator_->tokenizer();
    int64_t edits = 0, total = 0;
    for (const auto& s : data.samples) {
        Tensor logits = recognizer_->frame_logits(word_image_to_input(s.image));
        const std::string decoded =
            tokenizer.decode(ctc_greedy_decode(logits, tokenizer.blank_index()));
        edits += levenshtein(decoded, s.transcription);
        total += static_cast<int64_t>(s.transcription.size());
    }
    return total == 0 ? 0.0 : static_cast<double>(edits) / static_cast<double>(total);
}

double Trainer::wcn_accuracy(const Dataset& data) const {
    NoGradGuard ng;
    int64_t correct = 0;
    for (const auto& s : data.samples) {
        Tensor logits = writer_classifier_->logits({word_image_to_input(s.image)});
        int64_t best = 0;
        for (int64_t c = 1; c < logits.dim(1); ++c)
            if (logits.at(c) > logits.at(best)) best = c;
        if (best == s.writer) ++correct;
    }
    return data.samples.empty() ? 0.0
                                : static_cast<double>(correct) /
                                      static_cast<double>(data.samples.size());
}

} // namespace scriptgen
