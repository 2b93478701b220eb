#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "cvote/mlp.hpp"

namespace cvote::pipeline {

inline constexpr int kPoolFormatVersion = 1;

/// Writes the pool as a JSON document. Parameters are hex-encoded IEEE-754
/// doubles, so load_pool(save_pool(p)) reproduces every bit.
void save_pool(const ModelPool& pool, const std::filesystem::path& path);

/// Loads a pool file; verifies the format version, structural consistency and
/// (when given) the expected config fingerprint.
ModelPool load_pool(const std::filesystem::path& path,
                    const std::optional<std::string>& expected_fingerprint = std::nullopt);

}  // namespace cvote::pipeline
