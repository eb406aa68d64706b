// SPDX-License-Identifier: Apache-2.0
#include "core/tensor_container.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "core/errors.hpp"

namespace fs = std::filesystem;

namespace scriptgen {

using nlohmann::json;

void write_tensor_container(const std::string& dir, const TensorContainer& container) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = 1;
    manifest["element_type"] = "f32";
    manifest["byte_order"] = "little";
    manifest["word"] = container.word;
    json prov = json::array();
    for (const auto& p : container.provenance)
        prov.push_back({{"image", p.image_index}, {"row", p.patch_row}, {"col", p.patch_col}});
    manifest["provenance"] = std::move(prov);
    manifest["metadata"] = container.metadata;
    json tensors = json::array();
    for (const auto& [name, t] : container.tensors) {
        const std::string file = name + ".bin";
        tensors.push_back({{"name", name}, {"shape", t.shape}, {"file", file}});
        std::ofstream out(fs::path(dir) / file, std::ios::binary);
        if (!out) throw IoError("cannot write tensor file: " + file);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!out) throw IoError("tensor write failed: " + file);
    }
    manifest["tensors"] = std::move(tensors);
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IoError("cannot write container manifest under " + dir);
    mf << manifest.dump(2) << "\n";
}

TensorContainer read_tensor_container(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IoError("missing container manifest under " + dir);
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw FormatError("bad container manifest: " + std::string(e.what()));
    }
    TensorContainer c;
    c.word = manifest.value("word", "");
    if (manifest.contains("provenance"))
        for (const auto& p : manifest["provenance"])
            c.provenance.push_back({p.at("image").get<int>(), p.at("row").get<int>(),
                                    p.at("col").get<int>()});
    if (manifest.contains("metadata"))
        c.metadata = manifest["metadata"].get<std::map<std::string, std::string>>();
    for (const auto& entry : manifest.at("tensors")) {
        ContainerTensor t;
        t.shape = entry.at("shape").get<std::vector<int64_t>>();
        int64_t numel = 1;
        for (int64_t d : t.shape) numel *= d;
        const std::string file = entry.at("file").get<std::string>();
        std::ifstream in(fs::path(dir) / file, std::ios::binary);
        if (!in) throw IoError("missing tensor file: " + file);
        t.data.resize(static_cast<size_t>(numel));
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(float)))
            throw FormatError("truncated tensor file: " + file);
        c.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
    return c;
}

} // namespace scriptgen
