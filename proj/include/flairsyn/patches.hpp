#pragma once

#include <array>
#include <vector>

#include "flairsyn/volume.hpp"

namespace flairsyn::data {

// Overlapping patch grid: per axis the starts are {0, full - patch} (or {0}
// when patch == full), enumerated lexicographically with x most significant.
struct PatchLayout {
  std::array<int64_t, 3> full_shape{};
  std::array<int64_t, 3> patch_shape{};
  std::array<std::vector<int64_t>, 3> offsets;

  int64_t patch_count() const;
  std::array<int64_t, 3> offset_at(int64_t index) const;
};

PatchLayout plan_patch_layout(std::array<int64_t, 3> full_shape, std::array<int64_t, 3> patch_shape);

std::vector<Volume> extract_patches(const Volume& v, const PatchLayout& layout);

// Voxelwise mean of all patches covering each position.
Volume aggregate_patches(const std::vector<Volume>& patches, const PatchLayout& layout);

}  // namespace flairsyn::data
