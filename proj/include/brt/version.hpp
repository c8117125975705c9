#pragma once

namespace brt {
inline constexpr const char* kVersion = "0.1.0";
}
