#pragma once

namespace cmit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cmit
