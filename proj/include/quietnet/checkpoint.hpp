#pragma once

// Model checkpoint, version 1. All integers little-endian; doubles are stored
// as their IEEE-754 bit patterns (u64, little-endian), so a save/load round
// trip is bit-exact.
//
//   char[4]  "QNCK"
//   u32      version (1)
//   u32      number of layer sizes (L + 1), then u32 per size n_0..n_L
//   u64      initialization seed
//   u32 len + bytes   training mode ("standard", "noise-aware", ...)
//   u32 len + bytes   loss kind ("softmax-ce" | "sigmoid-mse")
//   u32 len + bytes   effective config, key=value lines
//   for l = 1..L:  f64[n_l * n_{l-1}] W(l) row-major, then f64[n_l] b(l)
//   u32      CRC-32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "quietnet/network.hpp"

namespace quietnet {

struct CheckpointMeta {
    std::uint64_t init_seed = 0;
    std::string mode;
    std::string loss;
    std::string config_text;
};

struct Checkpoint {
    MlpParams params;
    CheckpointMeta meta;
};

std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params, const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace quietnet
