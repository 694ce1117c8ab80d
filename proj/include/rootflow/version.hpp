#pragma once

namespace rootflow {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rootflow
