#pragma once

namespace decal {

inline constexpr const char* kVersion = "0.1.0";

// Bumped when any on-disk format (calibrator, policy, config, manifest) changes.
inline constexpr int kSchemaVersion = 1;

} // namespace decal
