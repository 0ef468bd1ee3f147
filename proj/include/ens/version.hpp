#pragma once

namespace ens {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ens
