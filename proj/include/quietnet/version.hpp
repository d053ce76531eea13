#pragma once

namespace quietnet {
inline constexpr const char* kVersion = "0.1.0";
}
