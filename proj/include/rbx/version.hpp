#pragma once

namespace rbx {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rbx
