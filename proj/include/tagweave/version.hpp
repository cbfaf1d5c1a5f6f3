#pragma once

namespace tagweave {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tagweave
