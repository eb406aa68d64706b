// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/nn.hpp"
#include "core/tensor.hpp"

namespace scriptgen {

// Single-file checkpoint container: magic + JSON header + raw
// little-endian float64 payload. Entries are the named parameters of all
// seven networks plus Adam moment buffers; RNG streams and counters ride
// in the header.
struct CheckpointData {
    RunConfig config;
    int64_t iteration{0};
    int64_t epoch{0};
    std::map<std::string, Tensor> params;
    std::map<std::string, std::vector<double>> adam_m;
    std::map<std::string, std::vector<double>> adam_v;
    std::map<std::string, int64_t> adam_steps;     // per optimizer name
    std::map<std::string, std::string> rng_states; // per stream name
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Copies checkpoint entries into a live registry; every registry parameter
// must exist in the checkpoint with a matching shape.
void load_params_into(const CheckpointData& ckpt, nn::ParamRegistry& reg);

// FNV-1a 64-bit content hash, hex-encoded (run manifests, replay checks).
std::string fnv1a_file_hex(const std::string& path);
uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h = 1469598103934665603ULL);

} // namespace scriptgen
