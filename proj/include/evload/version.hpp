#pragma once

namespace evload {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace evload
