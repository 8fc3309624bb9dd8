#pragma once

namespace cfl {

inline constexpr const char* kVersion = "cfl-lab 0.1.0";

}  // namespace cfl
