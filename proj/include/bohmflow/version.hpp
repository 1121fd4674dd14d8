#pragma once

namespace bohmflow {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace bohmflow
