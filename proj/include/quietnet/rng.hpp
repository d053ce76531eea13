#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace quietnet {

/// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Folds a base seed and a list of stream coordinates (layer, batch, sweep
/// point, ...) into one 64-bit seed. Different coordinate lists give
/// statistically independent streams; the result depends only on the values,
/// never on call order elsewhere in the program.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords) noexcept;

/// Seeded generator with portable uniform and Gaussian transforms.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The real-valued transforms are implemented here rather than via
/// <random> distributions, whose algorithms vary between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng derive(std::uint64_t base, std::initializer_list<std::uint64_t> coords)
    {
        return Rng(derive_seed(base, coords));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer on [0, n). Unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal();

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream tags used with derive_seed so that independent consumers of one
/// base seed never collide.
namespace stream {
inline constexpr std::uint64_t init = 0x1001;
inline constexpr std::uint64_t shuffle = 0x1002;
inline constexpr std::uint64_t train_noise = 0x1003;
inline constexpr std::uint64_t eval_noise = 0x1004;
inline constexpr std::uint64_t sweep_point = 0x1005;
inline constexpr std::uint64_t gradcheck = 0x1006;
inline constexpr std::uint64_t monte_carlo = 0x1007;
}  // namespace stream

}  // namespace quietnet
