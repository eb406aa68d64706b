// SPDX-License-Identifier: Apache-2.0
#include "core/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "core/errors.hpp"

namespace scriptgen {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'S', 'G', 'C', 'K', 'P', 'T', '1', '\n'};
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    json header;
    header["format"] = 1;
    header["byte_order"] = "little";
    header["dtype"] = "f64";
    header["config"] = config_to_map(data.config);
    header["iteration"] = data.iteration;
    header["epoch"] = data.epoch;
    header["adam_steps"] = data.adam_steps;
    header["rng_states"] = data.rng_states;
    json entries = json::array();
    uint64_t offset = 0;
    auto add_entry = [&](const std::string& name, const Shape& shape, size_t count) {
        json e;
        e["name"] = name;
        e["shape"] = shape;
        e["offset"] = offset;
        e["count"] = count;
        entries.push_back(std::move(e));
        offset += count * sizeof(double);
    };
    for (const auto& [name, t] : data.params)
        add_entry(name, t.shape(), t.data().size());
    for (const auto& [name, m] : data.adam_m)
        add_entry(name + ".adam_m", {static_cast<int64_t>(m.size())}, m.size());
    for (const auto& [name, v] : data.adam_v)
        add_entry(name + ".adam_v", {static_cast<int64_t>(v.size())}, v.size());
    header["entries"] = std::move(entries);
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    const uint64_t head_len = head.size();
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    auto write_block = [&](const std::vector<double>& block) {
        out.write(reinterpret_cast<const char*>(block.data()),
                  static_cast<std::streamsize>(block.size() * sizeof(double)));
    };
    for (const auto& [name, t] : data.params) write_block(t.data());
    for (const auto& [name, m] : data.adam_m) write_block(m);
    for (const auto& [name, v] : data.adam_v) write_block(v);
    if (!out) throw IoError("checkpoint write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("not a checkpoint file: " + path);
    uint64_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    if (in.gcount() != static_cast<std::streamsize>(head_len))
        throw FormatError("truncated checkpoint header: " + path);
    json header;
    try {
        header = json::parse(head);
    } catch (const json::exception& e) {
        throw FormatError("bad checkpoint header: " + std::string(e.what()));
    }
    CheckpointData data;
    for (const auto& [k, v] : header.at("config").get<std::map<std::string, std::string>>())
        apply_config_entry(data.config, k, v);
    data.iteration = header.value("iteration", 0);
    data.epoch = header.value("epoch", 0);
    if (header.contains("adam_steps"))
        data.adam_steps = header["adam_steps"].get<std::map<std::string, int64_t>>();
    if (header.contains("rng_states"))
        data.rng_states = header["rng_states"].get<std::map<std::string, std::string>>();
    const std::streampos payload_start = in.tellg();
    for (const auto& e : header.at("entries")) {
        const std::string name = e.at("name").get<std::string>();
        const auto count = e.at("count").get<size_t>();
        const auto offset = e.at("offset").get<uint64_t>();
        std::vector<double> block(count);
        in.seekg(payload_start + static_cast<std::streamoff>(offset));
        in.read(reinterpret_cast<char*>(block.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
            throw FormatError("truncated checkpoint entry '" + name + "': " + path);
        if (name.size() > 7 && name.substr(name.size() - 7) == ".adam_m") {
            data.adam_m[name.substr(0, name.size() - 7)] = std::move(block);
        } else if (name.size() > 7 && name.substr(name.size() - 7) == ".adam_v") {
            data.adam_v[name.substr(0, name.size() - 7)] = std::move(block);
        } else {
            Shape shape = e.at("shape").get<Shape>();
            data.params.emplace(name, Tensor::from_data(std::move(shape), std::move(block)));
        }
    }
    return data;
}

void load_params_into(const CheckpointData& ckpt, nn::ParamRegistry& reg) {
    for (const auto& [name, t] : reg.all()) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end())
            throw FormatError("checkpoint missing parameter '" + name + "'");
        if (it->second.shape() != t.shape())
            throw ShapeError("checkpoint parameter '" + name + "' has shape " +
                             shape_str(it->second.shape()) + ", model expects " +
                             shape_str(t.shape()));
        Tensor& dst = reg.get(name);
        dst.data() = it->second.data();
    }
}

uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash missing file: " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a_bytes(buf, static_cast<size_t>(in.gcount()), h);
        if (in.eof()) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

} // namespace scriptgen
