#pragma once

namespace camel {
inline constexpr const char* kVersion = "0.1.0";
}  // namespace camel
