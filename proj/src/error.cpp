#include "quietnet/error.hpp"

namespace quietnet {

std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::Truncated: return "Truncated";
    case Errc::DimensionOverflow: return "DimensionOverflow";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::NegativeVariance: return "NegativeVariance";
    case Errc::DomainError: return "DomainError";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::ConfigParse: return "ConfigParse";
    case Errc::DivergenceDetected: return "DivergenceDetected";
    case Errc::GradientMismatch: return "GradientMismatch";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

static std::string decorate(Errc code, const std::string& message, std::optional<std::uint64_t> offset)
{
    std::string out(to_string(code));
    out += ": ";
    out += message;
    if (offset) {
        out += " (at byte offset " + std::to_string(*offset) + ")";
    }
    return out;
}

Error::Error(Errc code, const std::string& message, std::optional<std::uint64_t> offset)
    : std::runtime_error(decorate(code, message, offset)), code_(code), message_(message), offset_(offset)
{
}

}  // namespace quietnet
