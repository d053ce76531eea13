#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace quietnet {

enum class Errc {
    BadMagic,
    Truncated,
    DimensionOverflow,
    LabelOutOfRange,
    CountMismatch,
    ShapeMismatch,
    NonFiniteInput,
    NegativeVariance,
    DomainError,
    ConfigMismatch,
    ConfigParse,
    DivergenceDetected,
    GradientMismatch,
    Io,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc codes so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::optional<std::uint64_t> offset = std::nullopt);

    Errc code() const noexcept { return code_; }
    /// The message without the code prefix and offset suffix.
    const std::string& message() const noexcept { return message_; }
    /// Byte offset into the input that triggered the error, for parser errors.
    std::optional<std::uint64_t> offset() const noexcept { return offset_; }

private:
    Errc code_;
    std::string message_;
    std::optional<std::uint64_t> offset_;
};

}  // namespace quietnet
