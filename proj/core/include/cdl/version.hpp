#pragma once

namespace cdl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cdl
