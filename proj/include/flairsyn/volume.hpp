#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace flairsyn::data {

/// 3-D scalar grid. Voxels are stored x-fastest: index = x + X*(y + Y*z),
/// matching the NIfTI on-disk layout.
struct Volume {
  std::array<int64_t, 3> shape{0, 0, 0};  // (X, Y, Z)
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::vector<double> voxels;
  double min_intensity = 0.0;
  double max_intensity = 0.0;

  Volume() = default;
  Volume(std::array<int64_t, 3> shape, std::array<double, 3> spacing = {1.0, 1.0, 1.0});

  int64_t numel() const { return shape[0] * shape[1] * shape[2]; }
  int64_t index(int64_t x, int64_t y, int64_t z) const { return x + shape[0] * (y + shape[1] * z); }
  double& at(int64_t x, int64_t y, int64_t z) { return voxels[static_cast<size_t>(index(x, y, z))]; }
  double at(int64_t x, int64_t y, int64_t z) const { return voxels[static_cast<size_t>(index(x, y, z))]; }

  /// Recompute the cached intensity_range from the voxel data.
  void refresh_intensity_range();

  /// Enforce the type invariants: finite voxels, shape/storage agreement,
  /// positive spacing. Throws std::invalid_argument with `context` on failure.
  void validate(const std::string& context = "volume") const;
};

/// Centered crop; start = floor((full - target)/2) per axis (lower index on
/// ties). Throws if the target exceeds the input shape.
Volume center_crop(const Volume& v, std::array<int64_t, 3> target_shape);

/// Crop at explicit start indices (config override for the centered default).
Volume crop_at(const Volume& v, std::array<int64_t, 3> start, std::array<int64_t, 3> target_shape);

std::array<int64_t, 3> center_crop_start(std::array<int64_t, 3> full, std::array<int64_t, 3> target);

/// Affine rescale to [-1, 1]: 2*(v - min)/(max - min) - 1. The output attains
/// -1 and +1 exactly. Throws "degenerate intensity range" on constant input.
Volume normalize_to_signed_unit(const Volume& v);

}  // namespace flairsyn::data
