#pragma once

namespace voxcond {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace voxcond
