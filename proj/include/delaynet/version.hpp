#pragma once

namespace delaynet {

inline constexpr const char* kVersion = "0.1.0";

} // namespace delaynet
