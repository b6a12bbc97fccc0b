#pragma once

namespace focuskit {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace focuskit
