// SPDX-License-Identifier: Apache-2.0
#include "core/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "core/errors.hpp"

namespace fs = std::filesystem;

namespace scriptgen {

std::vector<int64_t> Dataset::samples_of_writer(int64_t w) const {
    std::vector<int64_t> out;
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].writer == w) out.push_back(static_cast<int64_t>(i));
    return out;
}

ImageU8 preprocess_style_image(const ImageU8& raw, int target) {
    const ImageU8 gray = grayscale(raw);
    if (gray.h > target || gray.w > target)
        throw ValueError("preprocess_style_image: input " + std::to_string(gray.w) + "x" +
                         std::to_string(gray.h) + " exceeds the " + std::to_string(target) + "x" +
                         std::to_string(target) + " canvas (no cropping)");
    ImageU8 out(target, target, 3, 255);
    for (int y = 0; y < gray.h; ++y)
        for (int x = 0; x < gray.w; ++x) {
            const uint8_t v = gray.at(y, x);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    return out;
}

namespace {

struct ManifestRow {
    std::string rel_path;
    std::string transcription;
    std::string writer_key;
    std::string split;
};

std::vector<ManifestRow> read_manifest(const std::string& root) {
    const fs::path manifest = fs::path(root) / "manifest.tsv";
    std::ifstream in(manifest);
    if (!in) throw IoError("missing manifest: " + manifest.string());
    std::vector<ManifestRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 4)
            throw FormatError("manifest line " + std::to_string(lineno) +
                              ": expected 4 tab-separated columns, got " +
                              std::to_string(cols.size()));
        if (cols[3] != "train" && cols[3] != "test")
            throw FormatError("manifest line " + std::to_string(lineno) + ": bad split '" +
                              cols[3] + "'");
        rows.push_back({cols[0], cols[1], cols[2], cols[3]});
    }
    return rows;
}

} // namespace

Dataset load_words(const std::string& root, const std::string& split,
                   const CharsetTokenizer& tokenizer) {
    if (split != "train" && split != "test")
        throw ValueError("load_words: split must be 'train' or 'test'");
    const auto rows = read_manifest(root);
    // Contiguous writer ids by first appearance over the full manifest, so
    // both splits share one id space.
    std::map<std::string, int64_t> writer_ids;
    std::vector<std::string> order;
    for (const auto& r : rows)
        if (!writer_ids.count(r.writer_key)) {
            writer_ids[r.writer_key] = static_cast<int64_t>(order.size());
            order.push_back(r.writer_key);
        }
    Dataset data;
    data.writer_count = static_cast<int64_t>(order.size());
    for (const auto& r : rows) {
        if (r.split != split) continue;
        bool ok = !r.transcription.empty();
        for (char c : r.transcription)
            if (!tokenizer.contains(c)) ok = false;
        if (!ok) {
            ++data.skipped_charset;
            continue;
        }
        ImageU8 img;
        try {
            img = load_image((fs::path(root) / r.rel_path).string());
        } catch (const Error&) {
            ++data.skipped_unreadable;
            continue;
        }
        img = grayscale(img);
        if (img.h != kWordHeight) img = resize_to_height(img, kWordHeight);
        data.samples.push_back({std::move(img), r.transcription, writer_ids[r.writer_key]});
    }
    return data;
}

SynthStyle synthetic_writer_style(uint64_t seed, int64_t writer, int64_t num_writers) {
    // Draw per-writer parameters; redraw on a (vanishingly rare) collision
    // so any two writers differ in at least one parameter.
    auto draw = [&](int64_t w, int attempt) {
        Rng rng(mix_seed(seed, 0x57e11aULL + static_cast<uint64_t>(attempt),
                         static_cast<uint64_t>(w)));
        SynthStyle s;
        s.shear_deg = rng.uniform(-20.0, 20.0);
        s.thickness = 1 + static_cast<int>(rng.next_below(3));
        s.jitter_sigma = rng.uniform(0.0, 1.5);
        return s;
    };
    auto distinct = [](const SynthStyle& a, const SynthStyle& b) {
        return std::abs(a.shear_deg - b.shear_deg) > 1e-6 || a.thickness != b.thickness ||
               std::abs(a.jitter_sigma - b.jitter_sigma) > 1e-6;
    };
    // Reconstruct earlier writers' styles to test distinctness; writers are
    // resolved in index order so the procedure is deterministic.
    std::vector<SynthStyle> styles;
    styles.reserve(static_cast<size_t>(writer) + 1);
    for (int64_t w = 0; w <= writer && w < num_writers; ++w) {
        SynthStyle s = draw(w, 0);
        for (int attempt = 1; attempt < 100; ++attempt) {
            bool clash = false;
            for (const auto& prev : styles)
                if (!distinct(s, prev)) clash = true;
            if (!clash) break;
            s = draw(w, attempt);
        }
        styles.push_back(s);
    }
    return styles.back();
}

Dataset generate_synthetic_corpus(int64_t num_writers, const std::vector<std::string>& words,
                                  uint64_t seed, const CharsetTokenizer& tokenizer,
                                  uint64_t rendition) {
    if (num_writers < 1) throw ValueError("generate_synthetic_corpus: num_writers must be >= 1");
    if (words.empty()) throw ValueError("generate_synthetic_corpus: word list is empty");
    for (const auto& w : words) {
        if (w.empty()) throw ValueError("generate_synthetic_corpus: empty word");
        for (char c : w) tokenizer.encode_char(c); // throws CharsetError when invalid
    }
    Dataset data;
    data.writer_count = num_writers;
    data.samples.reserve(static_cast<size_t>(num_writers) * words.size());
    for (int64_t wi = 0; wi < num_writers; ++wi) {
        const SynthStyle style = synthetic_writer_style(seed, wi, num_writers);
        for (size_t j = 0; j < words.size(); ++j) {
            Rng rng(mix_seed(mix_seed(seed, static_cast<uint64_t>(wi), j), 0x11ULL, rendition));
            data.samples.push_back({render_word(words[j], style, rng), words[j], wi});
        }
    }
    return data;
}

StyleSampleSet style_set_from_images(const std::vector<ImageU8>& images, int64_t writer, int n,
                                     uint64_t seed, int image_size) {
    if (images.empty())
        throw ValueError("style set: writer " + std::to_string(writer) + " has no images");
    Rng rng(mix_seed(seed, 0x5e7, static_cast<uint64_t>(writer)));
    StyleSampleSet set;
    set.writer = writer;
    const int64_t count = static_cast<int64_t>(images.size());
    if (count >= n) {
        // Partial Fisher-Yates: n distinct picks.
        std::vector<int64_t> idx(static_cast<size_t>(count));
        for (int64_t i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = i;
        for (int i = 0; i < n; ++i) {
            const auto j = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(count - i))) + i;
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
            set.picked_indices.push_back(idx[static_cast<size_t>(i)]);
        }
    } else {
        for (int i = 0; i < n; ++i)
            set.picked_indices.push_back(
                static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(count))));
    }
    for (int64_t idx : set.picked_indices)
        set.images.push_back(preprocess_style_image(images[static_cast<size_t>(idx)], image_size));
    return set;
}

StyleSampleSet sample_style_set(const Dataset& data, int64_t writer, int n, uint64_t seed,
                                int image_size) {
    std::vector<ImageU8> images;
    for (const auto& s : data.samples)
        if (s.writer == writer) images.push_back(s.image);
    return style_set_from_images(images, writer, n, seed, image_size);
}

void write_dataset(const Dataset& data, const std::string& root,
                   const std::vector<std::string>& splits_per_sample) {
    if (splits_per_sample.size() != data.samples.size())
        throw ValueError("write_dataset: split list size mismatch");
    fs::create_directories(fs::path(root) / "images");
    std::ofstream manifest(fs::path(root) / "manifest.tsv");
    if (!manifest) throw IoError("cannot write manifest under " + root);
    std::map<int64_t, int64_t> per_writer_counter;
    for (size_t i = 0; i < data.samples.size(); ++i) {
        const WordSample& s = data.samples[i];
        const int64_t k = per_writer_counter[s.writer]++;
        const std::string rel = "images/w" + std::to_string(s.writer) + "_" + std::to_string(k) +
                                ".pgm";
        save_image(s.image, (fs::path(root) / rel).string());
        manifest << rel << '\t' << s.transcription << '\t' << "w" << s.writer << '\t'
                 << splits_per_sample[i] << '\n';
    }
    if (!manifest) throw IoError("manifest write failed under " + root);
}

} // namespace scriptgen
