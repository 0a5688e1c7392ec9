#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcq/scenes.hpp"

namespace hcq {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes one directory: index.json (ids, seeds, crc32 per blob) and per
/// sample an annotation <id>.json, a float32 LE image blob <id>.image.f32
/// [H,W,3] and a uint8 mask blob <id>.masks.u8 [N,H,W].
void export_dataset(const std::string& dir, const std::vector<SceneSample>& samples);

/// Verifies checksums. Pixels come back rounded to float32.
std::vector<SceneSample> import_dataset(const std::string& dir);

std::uint32_t crc32_of(const std::vector<unsigned char>& bytes);

}  // namespace hcq
