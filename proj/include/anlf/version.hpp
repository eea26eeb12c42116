#pragma once

#include <string_view>

namespace anlf {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr int kManifestVersion = 1;

}  // namespace anlf
