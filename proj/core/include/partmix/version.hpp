#pragma once

namespace partmix {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace partmix
