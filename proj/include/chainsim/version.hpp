#pragma once

namespace chainsim {

inline constexpr const char* kVersion = "0.1.0";

} // namespace chainsim
