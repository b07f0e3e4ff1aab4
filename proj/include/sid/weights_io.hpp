#pragma once

// Weight file layout (all integers unsigned 32-bit little-endian):
//   "SIDW" | version | descriptor length | descriptor text
//   then per parameter until end of file:
//   name length | name | rank | dims[rank] | float32 LE data

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sid/models.hpp"

namespace sid::io {

inline constexpr std::uint32_t kWeightsVersion = 1;

std::string serialize_weights(const models::Weights& w);
// Checks every name and shape against the descriptor's parameter table.
models::Weights deserialize_weights(const std::string& bytes);

void save_weights(const std::filesystem::path& path, const models::Weights& w);
// With `expected`, a file built for a different spec is a Mismatch error.
models::Weights load_weights(const std::filesystem::path& path,
                             const std::optional<models::ModelSpec>& expected = std::nullopt);

}  // namespace sid::io
