// SPDX-License-Identifier: Apache-2.0
#include "core/workflows.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/checkpoint.hpp"
#include "core/corpus.hpp"
#include "core/errors.hpp"
#include "core/generator.hpp"
#include "core/metrics.hpp"
#include "core/ssaa.hpp"
#include "core/tensor_container.hpp"
#include "core/trainer.hpp"

namespace fs = std::filesystem;

namespace scriptgen {

using nlohmann::json;

namespace {

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_run_manifest(const std::string& dir, const std::string& command,
                        const std::map<std::string, std::string>& args, uint64_t seed,
                        const std::string& checkpoint_hash,
                        const std::vector<std::string>& artifacts,
                        const std::map<std::string, std::string>* config_echo = nullptr) {
    json j;
    j["command"] = command;
    j["args"] = args;
    j["seed"] = seed;
    if (!checkpoint_hash.empty()) j["checkpoint_hash"] = checkpoint_hash;
    j["artifacts"] = artifacts;
    if (config_echo) j["config"] = *config_echo;
    j["timestamp"] = iso_now();
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "run_manifest.json");
    if (!out) throw IoError("cannot write run manifest under " + dir);
    out << j.dump(2) << "\n";
}

std::vector<std::string> read_words_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open words file: " + path);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    if (words.empty()) throw ValueError("words file is empty: " + path);
    return words;
}

std::vector<std::string> split_whitespace(const std::string& text) {
    std::istringstream ss(text);
    std::vector<std::string> out;
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

std::string sanitize(const std::string& word) {
    std::string out;
    for (char c : word)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
    return out;
}

struct LoadedModel {
    RunConfig cfg;
    CharsetTokenizer tokenizer;
    std::unique_ptr<Generator> generator;
    nn::ParamRegistry critic_reg;
    std::unique_ptr<Discriminator> discriminator;
    std::unique_ptr<Recognizer> recognizer;
    std::unique_ptr<WriterClassifier> writer_classifier;
};

LoadedModel load_model(const std::string& checkpoint_path, bool with_critics) {
    CheckpointData ckpt = load_checkpoint(checkpoint_path);
    LoadedModel m;
    m.cfg = ckpt.config;
    m.tokenizer = m.cfg.model.charset.empty() ? CharsetTokenizer()
                                              : CharsetTokenizer(m.cfg.model.charset);
    m.generator = std::make_unique<Generator>(m.cfg.model, m.tokenizer, m.cfg.train.seed);
    load_params_into(ckpt, m.generator->params());
    m.generator->params().set_requires_grad(false);
    if (with_critics) {
        Rng rng(mix_seed(m.cfg.train.seed, 0xc417));
        m.discriminator = std::make_unique<Discriminator>(m.cfg.model, m.critic_reg, rng);
        m.recognizer = std::make_unique<Recognizer>(m.cfg.model, m.tokenizer.num_classes(),
                                                    m.critic_reg, rng);
        m.writer_classifier = std::make_unique<WriterClassifier>(m.cfg.model, m.critic_reg, rng);
        load_params_into(ckpt, m.critic_reg);
        m.critic_reg.set_requires_grad(false);
    }
    return m;
}

std::vector<ImageU8> load_style_dir(const std::string& style_dir) {
    if (!fs::is_directory(style_dir)) throw IoError("style directory not found: " + style_dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(style_dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty())
        throw IoError("no style images (.pgm/.ppm) found in " + style_dir);
    std::vector<ImageU8> images;
    for (const auto& p : paths) {
        ImageU8 img = grayscale(load_image(p));
        if (img.h != kWordHeight) img = resize_to_height(img, kWordHeight);
        images.push_back(std::move(img));
    }
    return images;
}

ImageU8 generate_one_word(const LoadedModel& m, const StyleSampleSet& style,
                          const std::string& word, AttentionTrace* trace) {
    NoGradGuard ng;
    GeneratorOutput out = m.generator->forward({style}, {word}, trace, false, nullptr);
    return export_generated(out.images, 0, static_cast<int64_t>(word.size()));
}

} // namespace

void run_synth_data(const std::string& words_file, int64_t num_writers, uint64_t seed,
                    const std::string& out_dir) {
    if (num_writers < 1) throw ValueError("synth-data: --writers must be >= 1");
    const auto words = read_words_file(words_file);
    CharsetTokenizer tokenizer;
    // Train split plus an independent rendition of each word as test.
    Dataset train = generate_synthetic_corpus(num_writers, words, seed, tokenizer, 0);
    Dataset test = generate_synthetic_corpus(num_writers, words, seed, tokenizer, 1);
    Dataset all;
    all.writer_count = train.writer_count;
    std::vector<std::string> splits;
    for (auto& s : train.samples) {
        all.samples.push_back(std::move(s));
        splits.push_back("train");
    }
    for (auto& s : test.samples) {
        all.samples.push_back(std::move(s));
        splits.push_back("test");
    }
    write_dataset(all, out_dir, splits);
    write_run_manifest(out_dir, "synth-data",
                       {{"words", words_file},
                        {"writers", std::to_string(num_writers)},
                        {"out", out_dir}},
                       seed, "", {"manifest.tsv", "images/"});
}

std::string run_train(const std::string& config_file, const std::string& data_root,
                      const std::string& out_dir) {
    RunConfig cfg = load_config_file(config_file);
    CharsetTokenizer tokenizer =
        cfg.model.charset.empty() ? CharsetTokenizer() : CharsetTokenizer(cfg.model.charset);
    Dataset train = load_words(data_root, "train", tokenizer);
    Trainer trainer(std::move(train), cfg);
    const std::string final_ckpt = trainer.fit(out_dir);
    const auto echo = config_to_map(trainer.config());
    write_run_manifest(out_dir, "train",
                       {{"config", config_file}, {"data", data_root}, {"out", out_dir}},
                       cfg.train.seed, fnv1a_file_hex(final_ckpt),
                       {final_ckpt, "loss_log.jsonl"}, &echo);
    return final_ckpt;
}

void run_generate(const std::string& checkpoint, const std::string& text,
                  const std::string& style_dir, uint64_t seed, const std::string& out_dir,
                  bool save_attention) {
    const auto words = split_whitespace(text);
    if (words.empty()) throw ValueError("generate: --text is empty");
    LoadedModel m = load_model(checkpoint, false);
    const auto style_images = load_style_dir(style_dir);
    fs::create_directories(out_dir);
    std::vector<std::string> artifacts;
    for (size_t i = 0; i < words.size(); ++i) {
        StyleSampleSet style = style_set_from_images(style_images, 0, m.cfg.model.num_style_images,
                                                     mix_seed(seed, 0x9e4, i),
                                                     m.cfg.model.image_size);
        AttentionTrace trace;
        ImageU8 img = generate_one_word(m, style, words[i], save_attention ? &trace : nullptr);
        const std::string name = "word_" + std::to_string(i) + "_" + sanitize(words[i]) + ".pgm";
        save_image(img, (fs::path(out_dir) / name).string());
        artifacts.push_back(name);
        if (save_attention) {
            AttentionRecord rec = trace.record_for(0, trace.num_layers() - 1, words[i],
                                                   patch_provenance_table(m.cfg.model));
            TensorContainer c;
            c.word = words[i];
            c.provenance = rec.provenance;
            ContainerTensor a;
            a.shape = rec.weights.shape();
            a.data.assign(rec.weights.data().begin(), rec.weights.data().end());
            c.tensors.emplace("attention", std::move(a));
            const std::string cdir = "word_" + std::to_string(i) + "_" + sanitize(words[i]) +
                                     "_attention";
            write_tensor_container((fs::path(out_dir) / cdir).string(), c);
            artifacts.push_back(cdir + "/");
        }
    }
    write_run_manifest(out_dir, "generate",
                       {{"checkpoint", checkpoint},
                        {"text", text},
                        {"style-dir", style_dir},
                        {"out", out_dir}},
                       seed, fnv1a_file_hex(checkpoint), artifacts);
}

void run_ssaa(const std::string& checkpoint, const std::string& style_dir, const std::string& text,
              uint64_t seed, const std::string& out_dir, const SsaaOptions& opts) {
    const auto words = split_whitespace(text);
    if (words.size() != 1)
        throw ValueError("ssaa: --text must be exactly one word, got '" + text + "'");
    const std::string& word = words[0];
    LoadedModel m = load_model(checkpoint, false);
    const auto style_images = load_style_dir(style_dir);
    StyleSampleSet style = style_set_from_images(style_images, 0, m.cfg.model.num_style_images,
                                                 mix_seed(seed, 0x9e4, 0), m.cfg.model.image_size);
    AttentionTrace trace;
    ImageU8 generated = generate_one_word(m, style, word, &trace);
    AttentionRecord rec = trace.record_for(0, trace.num_layers() - 1, word,
                                           patch_provenance_table(m.cfg.model));
    const auto a_word = ssaa::average_attention(rec);
    const int side = m.cfg.model.patches_per_side();
    const int img_size = m.cfg.model.image_size;
    const auto maps = ssaa::reconstruct_maps(a_word, m.cfg.model.num_style_images, side, img_size);
    std::vector<ssaa::SalientStrokeSet> strokes;
    TensorContainer container;
    container.word = word;
    container.provenance = rec.provenance;
    container.metadata["percentile"] = std::to_string(opts.percentile);
    container.metadata["min_area"] = std::to_string(opts.min_area);
    container.metadata["top_k"] = std::to_string(opts.top_k);
    ContainerTensor at;
    at.shape = rec.weights.shape();
    at.data.assign(rec.weights.data().begin(), rec.weights.data().end());
    container.tensors.emplace("attention", std::move(at));
    ContainerTensor aw;
    aw.shape = {static_cast<int64_t>(a_word.values.size())};
    aw.data.assign(a_word.values.begin(), a_word.values.end());
    container.tensors.emplace("a_word", std::move(aw));
    for (int n = 0; n < m.cfg.model.num_style_images; ++n) {
        const auto& map = maps.maps[static_cast<size_t>(n)];
        const ssaa::InkMask mask = ssaa::ink_mask(style.images[static_cast<size_t>(n)]);
        const auto mai = ssaa::masked_attention(
            map, mask.mask);
        strokes.push_back(ssaa::salient_strokes(mai, img_size, img_size, opts.percentile,
                                                opts.min_area, opts.top_k));
        ContainerTensor mt;
        mt.shape = {img_size, img_size};
        mt.data.assign(map.begin(), map.end());
        container.tensors.emplace("map_" + std::to_string(n), std::move(mt));
        ContainerTensor it;
        it.shape = {img_size, img_size};
        it.data.resize(mask.mask.size());
        for (size_t i = 0; i < mask.mask.size(); ++i) it.data[i] = mask.mask[i];
        container.tensors.emplace("ink_mask_" + std::to_string(n), std::move(it));
        ContainerTensor mm;
        mm.shape = {img_size, img_size};
        mm.data.assign(mai.begin(), mai.end());
        container.tensors.emplace("mai_" + std::to_string(n), std::move(mm));
    }
    const ImageU8 grid = ssaa::render_grid(style.images, strokes, word);
    fs::create_directories(out_dir);
    save_image(grid, (fs::path(out_dir) / "ssaa_grid.ppm").string());
    save_image(generated, (fs::path(out_dir) / ("generated_" + sanitize(word) + ".pgm")).string());
    write_tensor_container((fs::path(out_dir) / "attention_container").string(), container);
    write_run_manifest(out_dir, "ssaa",
                       {{"checkpoint", checkpoint},
                        {"style-dir", style_dir},
                        {"text", text},
                        {"out", out_dir}},
                       seed, fnv1a_file_hex(checkpoint),
                       {"ssaa_grid.ppm", "generated_" + sanitize(word) + ".pgm",
                        "attention_container/"});
}

void run_evaluate(const std::string& checkpoint, const std::string& data_root,
                  const std::string& split, const std::string& extractor, uint64_t seed,
                  const std::string& out_path, const std::string& external_generated,
                  const std::string& external_reference) {
    LoadedModel m = load_model(checkpoint, true);
    Dataset data = load_words(data_root, split, m.tokenizer);
    if (data.samples.empty()) throw ValueError("evaluate: split '" + split + "' is empty");
    // Generate one image per (word, style set) pair from the same split.
    std::vector<std::vector<ImageU8>> writer_images(static_cast<size_t>(data.writer_count));
    for (const auto& s : data.samples)
        writer_images[static_cast<size_t>(s.writer)].push_back(s.image);
    std::vector<ImageU8> generated, reference;
    std::vector<CerPair> gen_pairs, ref_pairs;
    int64_t skipped = 0;
    for (size_t i = 0; i < data.samples.size(); ++i) {
        const WordSample& s = data.samples[i];
        if (static_cast<int>(s.transcription.size()) > m.cfg.model.max_text_len) {
            ++skipped;
            continue;
        }
        StyleSampleSet style = style_set_from_images(writer_images[static_cast<size_t>(s.writer)],
                                                     s.writer, m.cfg.model.num_style_images,
                                                     mix_seed(seed, 0xe7a1, i),
                                                     m.cfg.model.image_size);
        generated.push_back(generate_one_word(m, style, s.transcription, nullptr));
        reference.push_back(s.image);
        NoGradGuard ng;
        Tensor gen_logits = m.recognizer->frame_logits(word_image_to_input(generated.back()));
        Tensor ref_logits = m.recognizer->frame_logits(word_image_to_input(s.image));
        gen_pairs.push_back({m.tokenizer.decode(ctc_greedy_decode(gen_logits, m.tokenizer.blank_index())),
                             s.transcription});
        ref_pairs.push_back({m.tokenizer.decode(ctc_greedy_decode(ref_logits, m.tokenizer.blank_index())),
                             s.transcription});
    }
    if (generated.empty()) throw ValueError("evaluate: no usable samples in split");
    MetricReport report;
    report.recognizer = "tr-greedy";
    if (extractor == "external") {
        if (external_generated.empty() || external_reference.empty())
            throw ValueError("evaluate: extractor 'external' needs generated and reference "
                             "feature containers");
        auto load_features = [](const std::string& dir) {
            const TensorContainer c = read_tensor_container(dir);
            auto it = c.tensors.find("features");
            if (it == c.tensors.end())
                throw FormatError("feature container misses a 'features' tensor: " + dir);
            if (it->second.shape.size() != 2)
                throw ShapeError("features tensor must be (n, dim)");
            FeatureMatrix f;
            f.n = it->second.shape[0];
            f.dim = it->second.shape[1];
            f.data.assign(it->second.data.begin(), it->second.data.end());
            return f;
        };
        const FeatureMatrix fg = load_features(external_generated);
        const FeatureMatrix fr = load_features(external_reference);
        report.extractor = "external";
        report.fid = fid(fg, fr);
        report.kid = kid(fg, fr, 100, 100, seed);
    } else {
        std::unique_ptr<FeatureExtractor> ex;
        if (extractor == "wcn") {
            ex = std::make_unique<WcnFeatureExtractor>(*m.writer_classifier,
                                                       8 * m.cfg.model.disc_base_channels);
        } else if (extractor == "randconv") {
            ex = std::make_unique<RandConvFeatureExtractor>();
        } else {
            throw ValueError("evaluate: unknown extractor '" + extractor +
                             "' (available: wcn, randconv, external)");
        }
        report.extractor = ex->name();
        const FeatureMatrix fg = extract_features(*ex, generated);
        const FeatureMatrix fr = extract_features(*ex, reference);
        if (fg.n <= fg.dim)
            std::fprintf(stderr,
                         "evaluate: warning: %lld samples <= feature dim %lld; "
                         "covariances are rank-deficient\n",
                         static_cast<long long>(fg.n), static_cast<long long>(fg.dim));
        report.fid = fid(fg, fr);
        report.kid = kid(fg, fr, 100, 100, seed);
    }
    report.kid_x1000 = report.kid * 1000.0;
    report.cer_generated = character_error_rate(gen_pairs);
    report.cer_reference = character_error_rate(ref_pairs);
    report.delta_cer = delta_cer(gen_pairs, ref_pairs);
    report.generated_count = static_cast<int64_t>(generated.size());
    report.reference_count = static_cast<int64_t>(reference.size());

    json j;
    j["fid"] = report.fid;
    j["kid"] = report.kid;
    j["kid_x1000"] = report.kid_x1000;
    j["delta_cer"] = report.delta_cer;
    j["cer_generated"] = report.cer_generated;
    j["cer_reference"] = report.cer_reference;
    j["generated_count"] = report.generated_count;
    j["reference_count"] = report.reference_count;
    j["skipped"] = skipped;
    j["extractor"] = report.extractor;
    j["recognizer"] = report.recognizer;
    j["split"] = split;
    const fs::path out(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw IoError("cannot write report: " + out_path);
    f << j.dump(2) << "\n";
    write_run_manifest(out.has_parent_path() ? out.parent_path().string() : ".", "evaluate",
                       {{"checkpoint", checkpoint},
                        {"data", data_root},
                        {"split", split},
                        {"extractor", extractor},
                        {"out", out_path}},
                       seed, fnv1a_file_hex(checkpoint), {out.filename().string()});
}

} // namespace scriptgen
