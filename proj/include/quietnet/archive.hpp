#pragma once

// Dataset archive written by `quietnet ingest`. Little-endian layout:
//   char[4]  "QNDS"
//   u32      format version (1)
//   u32      name length, then name bytes (UTF-8)
//   u32      count, u32 rows, u32 cols
//   u8[count*rows*cols]  pixels, row-major per image
//   u8[count]            labels
//   u32      CRC-32 (zlib polynomial) of every preceding byte

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "quietnet/idx.hpp"

namespace quietnet {

struct ArchiveContents {
    RawImages images;
    std::vector<std::uint8_t> labels;
    std::string name;
    std::uint32_t checksum = 0;
};

/// Reads a whole file. Gzip-compressed input is decompressed transparently.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

/// Serializes and writes the archive; returns its checksum.
std::uint32_t write_dataset_archive(const std::filesystem::path& path, const RawImages& images,
                                    std::span<const std::uint8_t> labels, const std::string& name);

ArchiveContents read_dataset_archive(const std::filesystem::path& path);

/// Convenience: archive straight to a normalized Dataset.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace quietnet
