#pragma once

// Binary checkpoint layout, all integers and floats little-endian:
//
//   magic     8 bytes  "DAGECKPT"
//   version   u32      kCheckpointVersion
//   spec_hash u64      FNV-1a 64 of NetworkSpec::to_string()
//   spec_len  u32, spec text (spec_len bytes)
//   step      i64
//   count     u32      number of tensors
//   per tensor: rank u32, dims u64[rank], values f64[prod(dims)] (row-major)
//
// Each layer contributes two tensors (weight rank 2, bias rank 1); layers
// without parameters contribute a rank-0 placeholder pair with no values.

#include "dage/network.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>

namespace dage::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t spec_hash(const NetworkSpec& spec);

void save_checkpoint(const std::filesystem::path& path, const NetworkState& state);
NetworkState load_checkpoint(const std::filesystem::path& path);

}  // namespace dage::nn
