#pragma once

namespace curemc3 {

inline constexpr const char* version_string() noexcept { return "0.3.0"; }

}  // namespace curemc3
