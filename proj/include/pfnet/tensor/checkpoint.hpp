#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pfnet/tensor/tensor.hpp"

namespace pfnet {

// Named tensors plus a flat key=value header, stored as
//
//   "PFNETCKP" | u32 version | u64 header bytes | header text ("key=value\n")*
//   | u64 tensor count | per tensor: u32 name length, name, u32 rank,
//   u64 dims[rank], f64 values[numel]
//
// All integers and doubles are little-endian; values are written bit-exactly.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> header;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  const std::string& header_value(const std::string& key) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace pfnet
