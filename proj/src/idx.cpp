#include "quietnet/idx.hpp"

#include <limits>

#include "quietnet/error.hpp"

namespace quietnet {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset)
{
    if (bytes.size() < offset + 4) {
        throw Error(Errc::Truncated, "header ends early", bytes.size());
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected)
{
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != expected) {
        throw Error(Errc::BadMagic,
                    "expected magic " + std::to_string(expected) + ", found " + std::to_string(magic), 0);
    }
}

void check_payload(std::span<const std::uint8_t> bytes, std::size_t header, std::size_t payload)
{
    if (bytes.size() - header < payload) {
        throw Error(Errc::Truncated,
                    "payload holds " + std::to_string(bytes.size() - header) + " bytes, header promises " +
                        std::to_string(payload),
                    bytes.size());
    }
    if (bytes.size() - header > payload) {
        throw Error(Errc::ShapeMismatch, "trailing bytes after declared payload", header + payload);
    }
}

}  // namespace

RawImages parse_idx_images(std::span<const std::uint8_t> bytes)
{
    check_magic(bytes, kIdxImageMagic);
    RawImages out;
    out.count = read_be32(bytes, 4);
    out.rows = read_be32(bytes, 8);
    out.cols = read_be32(bytes, 12);
    constexpr std::size_t header = 16;

    std::size_t plane = 0;
    std::size_t total = 0;
    if (__builtin_mul_overflow(std::size_t{out.rows}, std::size_t{out.cols}, &plane) ||
        __builtin_mul_overflow(plane, std::size_t{out.count}, &total) ||
        total > std::numeric_limits<std::size_t>::max() - header) {
        throw Error(Errc::DimensionOverflow, "count * rows * cols overflows the size type", 4);
    }
    check_payload(bytes, header, total);
    out.pixels.assign(bytes.begin() + header, bytes.begin() + header + total);
    return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes, int num_classes)
{
    check_magic(bytes, kIdxLabelMagic);
    const std::uint32_t count = read_be32(bytes, 4);
    constexpr std::size_t header = 8;
    check_payload(bytes, header, count);
    std::vector<std::uint8_t> labels(bytes.begin() + header, bytes.end());
    if (num_classes > 0) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] >= num_classes) {
                throw Error(Errc::LabelOutOfRange,
                            "label " + std::to_string(labels[i]) + " not below " + std::to_string(num_classes),
                            header + i);
            }
        }
    }
    return labels;
}

std::vector<std::uint8_t> serialize_idx_images(const RawImages& images)
{
    std::vector<std::uint8_t> out;
    out.reserve(16 + images.pixels.size());
    write_be32(out, kIdxImageMagic);
    write_be32(out, images.count);
    write_be32(out, images.rows);
    write_be32(out, images.cols);
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

std::vector<std::uint8_t> serialize_idx_labels(std::span<const std::uint8_t> labels)
{
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.size());
    write_be32(out, kIdxLabelMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

Dataset to_dataset(const RawImages& images, std::span<const std::uint8_t> labels, std::string name)
{
    if (images.count != labels.size()) {
        throw Error(Errc::CountMismatch, std::to_string(images.count) + " images but " +
                                             std::to_string(labels.size()) + " labels");
    }
    if (std::size_t{images.rows} * images.cols != kImagePixels) {
        throw Error(Errc::ShapeMismatch, "images are " + std::to_string(images.rows) + "x" +
                                             std::to_string(images.cols) + ", expected 784 pixels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= kNumClasses) {
            throw Error(Errc::LabelOutOfRange, "label " + std::to_string(labels[i]) + " at index " + std::to_string(i));
        }
    }
    Dataset out;
    out.name = std::move(name);
    out.labels.assign(labels.begin(), labels.end());
    out.features.resize(images.count, kImagePixels);
    double* dst = out.features.data();
    for (std::size_t i = 0; i < images.pixels.size(); ++i) {
        dst[i] = static_cast<double>(images.pixels[i]) / 255.0;
    }
    return out;
}

Dataset slice(const Dataset& data, std::size_t first, std::size_t count)
{
    if (first + count > data.size()) {
        throw Error(Errc::ShapeMismatch, "slice exceeds dataset size");
    }
    Dataset out;
    out.name = data.name;
    out.features = data.features.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
    out.labels.assign(data.labels.begin() + first, data.labels.begin() + first + count);
    return out;
}

}  // namespace quietnet
