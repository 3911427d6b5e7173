#pragma once

namespace yarnlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace yarnlab
