#include "quietnet/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "quietnet/archive.hpp"
#include "quietnet/error.hpp"

namespace quietnet {

namespace {

constexpr char kMagic[4] = {'Q', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::vector<std::uint8_t> out;

    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
};

struct Reader {
    const std::vector<std::uint8_t>& in;
    std::size_t pos = 0;

    void need(std::size_t n) const
    {
        if (in.size() - pos < n) throw Error(Errc::Truncated, "checkpoint ends early", in.size());
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[pos++]} << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[pos++]} << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str()
    {
        const std::uint32_t n = u32();
        need(n);
        std::string s(in.begin() + static_cast<std::ptrdiff_t>(pos), in.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return s;
    }
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params, const CheckpointMeta& meta)
{
    params.validate();
    Writer w;
    w.out.insert(w.out.end(), std::begin(kMagic), std::end(kMagic));
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(params.layer_sizes.size()));
    for (int n : params.layer_sizes) w.u32(static_cast<std::uint32_t>(n));
    w.u64(meta.init_seed);
    w.str(meta.mode);
    w.str(meta.loss);
    w.str(meta.config_text);
    for (int l = 1; l <= params.num_layers(); ++l) {
        const Eigen::MatrixXd& m = params.W(l);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
        }
        for (Eigen::Index i = 0; i < params.b(l).size(); ++i) w.f64(params.b(l)[i]);
    }
    w.u32(crc32_of(w.out));
    return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    Reader r{bytes};
    r.need(4);
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw Error(Errc::BadMagic, "not a quietnet checkpoint", 0);
    }
    r.pos = 4;
    if (const auto v = r.u32(); v != kVersion) {
        throw Error(Errc::BadMagic, "unsupported checkpoint version " + std::to_string(v), 4);
    }
    Checkpoint c;
    const std::uint32_t count = r.u32();
    if (count < 2 || count > 64) {
        throw Error(Errc::ShapeMismatch, "implausible layer count " + std::to_string(count), 8);
    }
    std::vector<int> sizes;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t n = r.u32();
        if (n == 0 || n > (1u << 24)) throw Error(Errc::ShapeMismatch, "implausible layer size", r.pos - 4);
        sizes.push_back(static_cast<int>(n));
    }
    c.meta.init_seed = r.u64();
    c.meta.mode = r.str();
    c.meta.loss = r.str();
    c.meta.config_text = r.str();
    c.params = MlpParams::zeros(sizes);
    for (int l = 1; l <= c.params.num_layers(); ++l) {
        Eigen::MatrixXd& m = c.params.W(l);
        r.need(static_cast<std::size_t>(m.size() + c.params.b(l).size()) * 8);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
        }
        for (Eigen::Index i = 0; i < c.params.b(l).size(); ++i) c.params.b(l)[i] = r.f64();
    }
    const std::size_t body = r.pos;
    const std::uint32_t crc = r.u32();
    if (crc32_of(std::span(bytes).first(body)) != crc) {
        throw Error(Errc::Io, "checkpoint checksum mismatch");
    }
    if (r.pos != bytes.size()) {
        throw Error(Errc::ShapeMismatch, "trailing bytes after checkpoint", r.pos);
    }
    c.params.validate();
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params, const CheckpointMeta& meta)
{
    const auto bytes = encode_checkpoint(params, meta);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::Io, "cannot write " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(Errc::Io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(Errc::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace quietnet
