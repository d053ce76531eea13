#pragma once

// IDX container (MNIST / Fashion-MNIST): 4-byte big-endian magic, one 4-byte
// big-endian size per dimension, then a row-major payload of unsigned bytes.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace quietnet {

inline constexpr std::uint32_t kIdxImageMagic = 2051;  // 0x00000803
inline constexpr std::uint32_t kIdxLabelMagic = 2049;  // 0x00000801
inline constexpr int kImagePixels = 784;
inline constexpr int kNumClasses = 10;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RawImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image

    bool operator==(const RawImages&) const = default;
};

struct Dataset {
    RowMatrix features;            // count x 784, every entry in [0, 1]
    std::vector<std::uint8_t> labels;
    std::string name;

    std::size_t size() const noexcept { return labels.size(); }
};

RawImages parse_idx_images(std::span<const std::uint8_t> bytes);

/// Parses an IDX label file. When `num_classes` is positive, every label must
/// be below it.
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, int num_classes = kNumClasses);

std::vector<std::uint8_t> serialize_idx_images(const RawImages& images);
std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels);

/// Normalizes pixels to x / 255. Requires 28x28 images and one label per image.
Dataset to_dataset(const RawImages& images, std::span<const std::uint8_t> labels, std::string name = {});

/// Rows [first, first + count) of `data`, order preserved.
Dataset slice(const Dataset& data, std::size_t first, std::size_t count);

}  // namespace quietnet
