#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace frames::model {

struct NamedTensor {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<float> data;
};

// Binary tensor container:
//   "FRMW" | u32 version | u32 count |
//   count x ( u32 name_len | name | u32 ndim | u64 dims[ndim] | f32 data[prod(dims)] )
// All integers and floats little-endian.
void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors);

// Throws LoadError on a missing, truncated or malformed file.
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

}  // namespace frames::model
