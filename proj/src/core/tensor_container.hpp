// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/style_encoder.hpp"

namespace scriptgen {

// Directory-based tensor container: manifest.json (names, shapes, element
// type f32, little-endian byte order, plus free-form metadata) and one raw
// binary per tensor.
struct ContainerTensor {
    std::vector<int64_t> shape;
    std::vector<float> data;
};

struct TensorContainer {
    std::map<std::string, ContainerTensor> tensors;
    std::string word;
    std::vector<PatchProvenance> provenance;
    std::map<std::string, std::string> metadata;
};

void write_tensor_container(const std::string& dir, const TensorContainer& container);
TensorContainer read_tensor_container(const std::string& dir);

} // namespace scriptgen
