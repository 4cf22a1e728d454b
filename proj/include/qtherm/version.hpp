#pragma once

namespace qtherm {
inline constexpr const char* artifact_version = "0.1.0";
// Bumped whenever a value in model.hpp's constants table changes.
inline constexpr const char* constants_table_version = "codata-2018";
}  // namespace qtherm
