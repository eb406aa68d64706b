// SPDX-License-Identifier: Apache-2.0
#include "core/config.hpp"

#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace scriptgen {

void ModelConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
        throw ValueError("model: image_size must be a positive multiple of patch_size");
    if (vit_embed <= 0 || vit_heads <= 0 || vit_embed % vit_heads != 0)
        throw ValueError("model: vit_embed must be divisible by vit_heads");
    if (d_model <= 0 || fusion_heads <= 0 || d_model % fusion_heads != 0)
        throw ValueError("model: d_model must be divisible by fusion_heads");
    if (vit_depth <= 0 || fusion_layers <= 0) throw ValueError("model: depths must be >= 1");
    if (max_text_len <= 0) throw ValueError("model: max_text_len must be >= 1");
    if (num_style_images <= 0) throw ValueError("model: num_style_images must be >= 1");
    if (synth_base_channels < 8 || synth_base_channels % 8 != 0)
        throw ValueError("model: synth_base_channels must be a multiple of 8");
}

void TrainConfig::validate() const {
    if (g_update_period < 1) throw ValueError("train: g_update_period must be >= 1");
    if (lr_g <= 0 || lr_d <= 0 || lr_tr <= 0 || lr_wcn <= 0)
        throw ValueError("train: learning rates must be positive");
    if (batch_size < 1) throw ValueError("train: batch_size must be >= 1");
    if (epochs < 1 && max_iterations < 1)
        throw ValueError("train: need epochs >= 1 or max_iterations >= 1");
}

namespace {

int64_t to_i64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw FormatError("config: bad integer for " + key + ": '" + v + "'");
    }
}

double to_f64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw FormatError("config: bad number for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw FormatError("config: bad boolean for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

} // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    ModelConfig& m = cfg.model;
    TrainConfig& t = cfg.train;
    if (key == "image_size") m.image_size = static_cast<int>(to_i64(value, key));
    else if (key == "patch_size") m.patch_size = static_cast<int>(to_i64(value, key));
    else if (key == "vit_embed") m.vit_embed = to_i64(value, key);
    else if (key == "vit_depth") m.vit_depth = static_cast<int>(to_i64(value, key));
    else if (key == "vit_heads") m.vit_heads = to_i64(value, key);
    else if (key == "vit_mlp_ratio") m.vit_mlp_ratio = to_f64(value, key);
    else if (key == "d_model") m.d_model = to_i64(value, key);
    else if (key == "fusion_layers") m.fusion_layers = static_cast<int>(to_i64(value, key));
    else if (key == "fusion_heads") m.fusion_heads = to_i64(value, key);
    else if (key == "fusion_ffn") m.fusion_ffn = to_i64(value, key);
    else if (key == "fusion_dropout") m.fusion_dropout = to_f64(value, key);
    else if (key == "max_text_len") m.max_text_len = static_cast<int>(to_i64(value, key));
    else if (key == "num_style_images") m.num_style_images = static_cast<int>(to_i64(value, key));
    else if (key == "synth_base_channels") m.synth_base_channels = to_i64(value, key);
    else if (key == "disc_base_channels") m.disc_base_channels = to_i64(value, key);
    else if (key == "tr_base_channels") m.tr_base_channels = to_i64(value, key);
    else if (key == "tr_hidden") m.tr_hidden = to_i64(value, key);
    else if (key == "writer_count") m.writer_count = to_i64(value, key);
    else if (key == "charset") m.charset = value;
    else if (key == "seed") t.seed = static_cast<uint64_t>(to_i64(value, key));
    else if (key == "epochs") t.epochs = static_cast<int>(to_i64(value, key));
    else if (key == "batch_size") t.batch_size = to_i64(value, key);
    else if (key == "lr_g") t.lr_g = to_f64(value, key);
    else if (key == "lr_d") t.lr_d = to_f64(value, key);
    else if (key == "lr_tr") t.lr_tr = to_f64(value, key);
    else if (key == "lr_wcn") t.lr_wcn = to_f64(value, key);
    else if (key == "adam_beta1") t.adam_beta1 = to_f64(value, key);
    else if (key == "adam_beta2") t.adam_beta2 = to_f64(value, key);
    else if (key == "g_update_period") t.g_update_period = static_cast<int>(to_i64(value, key));
    else if (key == "grad_clip") t.grad_clip = to_f64(value, key);
    else if (key == "max_iterations") t.max_iterations = to_i64(value, key);
    else if (key == "style_resample_per_batch") t.style_resample_per_batch = to_bool(value, key);
    else if (key == "checkpoint_every_epochs") t.checkpoint_every_epochs = static_cast<int>(to_i64(value, key));
    else throw FormatError("config: unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        apply_config_entry(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::map<std::string, std::string> config_to_map(const RunConfig& cfg) {
    std::map<std::string, std::string> kv;
    const ModelConfig& m = cfg.model;
    const TrainConfig& t = cfg.train;
    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    kv["image_size"] = std::to_string(m.image_size);
    kv["patch_size"] = std::to_string(m.patch_size);
    kv["vit_embed"] = std::to_string(m.vit_embed);
    kv["vit_depth"] = std::to_string(m.vit_depth);
    kv["vit_heads"] = std::to_string(m.vit_heads);
    kv["vit_mlp_ratio"] = fmt(m.vit_mlp_ratio);
    kv["d_model"] = std::to_string(m.d_model);
    kv["fusion_layers"] = std::to_string(m.fusion_layers);
    kv["fusion_heads"] = std::to_string(m.fusion_heads);
    kv["fusion_ffn"] = std::to_string(m.fusion_ffn);
    kv["fusion_dropout"] = fmt(m.fusion_dropout);
    kv["max_text_len"] = std::to_string(m.max_text_len);
    kv["num_style_images"] = std::to_string(m.num_style_images);
    kv["synth_base_channels"] = std::to_string(m.synth_base_channels);
    kv["disc_base_channels"] = std::to_string(m.disc_base_channels);
    kv["tr_base_channels"] = std::to_string(m.tr_base_channels);
    kv["tr_hidden"] = std::to_string(m.tr_hidden);
    kv["writer_count"] = std::to_string(m.writer_count);
    if (!m.charset.empty()) kv["charset"] = m.charset;
    kv["seed"] = std::to_string(t.seed);
    kv["epochs"] = std::to_string(t.epochs);
    kv["batch_size"] = std::to_string(t.batch_size);
    kv["lr_g"] = fmt(t.lr_g);
    kv["lr_d"] = fmt(t.lr_d);
    kv["lr_tr"] = fmt(t.lr_tr);
    kv["lr_wcn"] = fmt(t.lr_wcn);
    kv["adam_beta1"] = fmt(t.adam_beta1);
    kv["adam_beta2"] = fmt(t.adam_beta2);
    kv["g_update_period"] = std::to_string(t.g_update_period);
    kv["grad_clip"] = fmt(t.grad_clip);
    kv["max_iterations"] = std::to_string(t.max_iterations);
    kv["style_resample_per_batch"] = t.style_resample_per_batch ? "true" : "false";
    kv["checkpoint_every_epochs"] = std::to_string(t.checkpoint_every_epochs);
    return kv;
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& [k, v] : config_to_map(cfg)) os << k << " = " << v << "\n";
    return os.str();
}

} // namespace scriptgen
