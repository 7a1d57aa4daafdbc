#pragma once

// Dense Tensor File (DTF):
//   bytes 0..3   magic "DRTF"
//   bytes 4..7   format version, u32 little-endian
//   bytes 8..11  header length in bytes, u32 little-endian
//   header       UTF-8 JSON {"dtype":"f64","order":"row-major","shape":[...]}
//   payload      row-major float64 values, little-endian
//
// A bundle is a directory of DTF files plus manifest.json listing each
// tensor's name, file and shape alongside free-form metadata.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "drmn/tensor.hpp"

namespace drmn {

inline constexpr std::uint32_t kDtfVersion = 1;

std::string encode_dtf(const Tensor& t);
Tensor decode_dtf(std::string_view bytes);

void write_dtf(const std::filesystem::path& path, const Tensor& t);
Tensor read_dtf(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct Bundle {
  NamedTensors tensors;
  nlohmann::json metadata;

  const Tensor& at(std::string_view name) const;
};

void write_bundle(const std::filesystem::path& dir, const Bundle& bundle);
Bundle read_bundle(const std::filesystem::path& dir);

/// Whole-file helpers shared by every on-disk format.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace drmn
