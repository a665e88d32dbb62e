#include "flairsyn/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flairsyn::data {

Volume::Volume(std::array<int64_t, 3> shape_, std::array<double, 3> spacing) : shape(shape_), spacing_mm(spacing) {
  for (int i = 0; i < 3; ++i)
    if (shape[i] <= 0) throw std::invalid_argument("Volume: non-positive shape");
  voxels.assign(static_cast<size_t>(numel()), 0.0);
}

void Volume::refresh_intensity_range() {
  if (voxels.empty()) throw std::invalid_argument("Volume: empty voxel data");
  auto [lo, hi] = std::minmax_element(voxels.begin(), voxels.end());
  min_intensity = *lo;
  max_intensity = *hi;
}

void Volume::validate(const std::string& context) const {
  for (int i = 0; i < 3; ++i) {
    if (shape[i] <= 0) throw std::invalid_argument(context + ": non-positive shape axis " + std::to_string(i));
    if (!(spacing_mm[i] > 0.0)) throw std::invalid_argument(context + ": non-positive spacing axis " + std::to_string(i));
  }
  if (static_cast<int64_t>(voxels.size()) != numel())
    throw std::invalid_argument(context + ": voxel storage does not match shape");
  for (double v : voxels)
    if (!std::isfinite(v)) throw std::invalid_argument(context + ": non-finite voxel value");
}

std::array<int64_t, 3> center_crop_start(std::array<int64_t, 3> full, std::array<int64_t, 3> target) {
  std::array<int64_t, 3> start{};
  for (int i = 0; i < 3; ++i) {
    if (target[i] > full[i])
      throw std::invalid_argument("center_crop: target exceeds input shape on axis " + std::to_string(i));
    start[i] = (full[i] - target[i]) / 2;
  }
  return start;
}

Volume crop_at(const Volume& v, std::array<int64_t, 3> start, std::array<int64_t, 3> target_shape) {
  for (int i = 0; i < 3; ++i) {
    if (target_shape[i] < 1 || start[i] < 0 || start[i] + target_shape[i] > v.shape[i])
      throw std::invalid_argument("crop_at: window out of bounds on axis " + std::to_string(i));
  }
  Volume out(target_shape, v.spacing_mm);
  for (int64_t z = 0; z < target_shape[2]; ++z)
    for (int64_t y = 0; y < target_shape[1]; ++y) {
      const double* src = v.voxels.data() + v.index(start[0], start[1] + y, start[2] + z);
      std::copy_n(src, target_shape[0], out.voxels.data() + out.index(0, y, z));
    }
  out.refresh_intensity_range();
  return out;
}

Volume center_crop(const Volume& v, std::array<int64_t, 3> target_shape) {
  return crop_at(v, center_crop_start(v.shape, target_shape), target_shape);
}

Volume normalize_to_signed_unit(const Volume& v) {
  if (v.voxels.empty()) throw std::invalid_argument("normalize_to_signed_unit: empty volume");
  auto [lo, hi] = std::minmax_element(v.voxels.begin(), v.voxels.end());
  const double mn = *lo, mx = *hi;
  if (!(mx > mn)) throw std::invalid_argument("normalize_to_signed_unit: degenerate intensity range");
  Volume out(v.shape, v.spacing_mm);
  const double span = mx - mn;
  for (size_t i = 0; i < v.voxels.size(); ++i) out.voxels[i] = 2.0 * (v.voxels[i] - mn) / span - 1.0;
  out.min_intensity = -1.0;
  out.max_intensity = 1.0;
  return out;
}

}  // namespace flairsyn::data
