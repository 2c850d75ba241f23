#pragma once

#include <cstdint>

namespace morphparse {

inline constexpr int kVersionMajor = 0;
inline constexpr int kVersionMinor = 1;
inline constexpr const char* kVersionString = "0.1.0";

/// Version of the on-disk model archive layout. Bumped on any change to the
/// container format or the manifest schema; loaders reject other versions.
inline constexpr std::uint32_t kArchiveFormatVersion = 1;

/// Version of the binary embedding-export block.
inline constexpr std::uint32_t kEmbeddingExportVersion = 1;

}  // namespace morphparse
