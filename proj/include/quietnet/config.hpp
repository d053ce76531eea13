#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment, keys use section dots (training.*, noise.*, reg.*, data.*, output.*).

#include <filesystem>
#include <string>
#include <string_view>

#include "quietnet/training.hpp"

namespace quietnet {

struct RunConfig {
    TrainConfig train;
    std::string train_data;   // dataset archive paths; relative paths resolve
    std::string test_data;    // against the data directory
    std::string val_data;     // optional; empty -> hold out the tail of train_data
    std::size_t validation_size = 10000;
    std::string output_dir = "runs";
    std::string tag = "model";
};

/// Parses config text. Errors carry the 1-based line number in the message
/// and are raised as ConfigParse (unknown key, bad value) or ConfigMismatch.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` setting (command-line override).
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Canonical text listing every effective key; parse_config of it reproduces `cfg`.
std::string to_config_text(const RunConfig& cfg);

/// Directory used to resolve relative dataset paths: $QUIETNET_DATA_DIR, else ".".
std::filesystem::path data_directory();
std::filesystem::path resolve_data_path(const std::string& path);

}  // namespace quietnet
