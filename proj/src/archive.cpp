#include "quietnet/archive.hpp"

#include <algorithm>
#include <fstream>

#include <zlib.h>

#include "quietnet/error.hpp"

namespace quietnet {

namespace {

constexpr char kArchiveMagic[4] = {'Q', 'N', 'D', 'S'};
constexpr std::uint32_t kArchiveVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::span<const std::uint8_t> take(std::size_t n)
    {
        if (bytes_.size() - pos_ < n) {
            throw Error(Errc::Truncated, "archive ends early", bytes_.size());
        }
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint32_t u32()
    {
        auto b = take(4);
        return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
               (std::uint32_t{b[3]} << 24);
    }

    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    gzFile file = gzopen(path.string().c_str(), "rb");
    if (file == nullptr) {
        throw Error(Errc::Io, "cannot open " + path.string());
    }
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> chunk(1 << 20);
    for (;;) {
        const int n = gzread(file, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int errnum = 0;
            std::string msg = gzerror(file, &errnum);
            gzclose(file);
            throw Error(Errc::Io, "read failed for " + path.string() + ": " + msg);
        }
        if (n == 0) {
            break;
        }
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    gzclose(file);
    return out;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t done = 0;
    while (done < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
        crc = crc32(crc, bytes.data() + done, n);
        done += n;
    }
    return static_cast<std::uint32_t>(crc);
}

std::uint32_t write_dataset_archive(const std::filesystem::path& path, const RawImages& images,
                                    std::span<const std::uint8_t> labels, const std::string& name)
{
    if (images.count != labels.size()) {
        throw Error(Errc::CountMismatch, "image and label counts differ");
    }
    std::vector<std::uint8_t> out;
    out.reserve(32 + name.size() + images.pixels.size() + labels.size());
    out.insert(out.end(), std::begin(kArchiveMagic), std::end(kArchiveMagic));
    put_u32(out, kArchiveVersion);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, images.count);
    put_u32(out, images.rows);
    put_u32(out, images.cols);
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    out.insert(out.end(), labels.begin(), labels.end());
    const std::uint32_t crc = crc32_of(out);
    put_u32(out, crc);

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw Error(Errc::Io, "cannot write " + path.string());
    }
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) {
        throw Error(Errc::Io, "write failed for " + path.string());
    }
    return crc;
}

ArchiveContents read_dataset_archive(const std::filesystem::path& path)
{
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    Reader in(bytes);
    auto magic = in.take(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kArchiveMagic))) {
        throw Error(Errc::BadMagic, path.string() + " is not a dataset archive", 0);
    }
    if (const auto version = in.u32(); version != kArchiveVersion) {
        throw Error(Errc::BadMagic, "unsupported archive version " + std::to_string(version), 4);
    }
    ArchiveContents out;
    const std::uint32_t name_len = in.u32();
    auto name = in.take(name_len);
    out.name.assign(name.begin(), name.end());
    out.images.count = in.u32();
    out.images.rows = in.u32();
    out.images.cols = in.u32();
    const std::size_t pixel_count = std::size_t{out.images.count} * out.images.rows * out.images.cols;
    auto pixels = in.take(pixel_count);
    out.images.pixels.assign(pixels.begin(), pixels.end());
    auto labels = in.take(out.images.count);
    out.labels.assign(labels.begin(), labels.end());
    const std::size_t body = in.pos();
    out.checksum = in.u32();
    if (crc32_of(std::span(bytes).first(body)) != out.checksum) {
        throw Error(Errc::Io, "checksum mismatch in " + path.string());
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& path)
{
    ArchiveContents c = read_dataset_archive(path);
    return to_dataset(c.images, c.labels, c.name);
}

}  // namespace quietnet
