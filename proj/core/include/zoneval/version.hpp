#pragma once

namespace zoneval {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace zoneval
