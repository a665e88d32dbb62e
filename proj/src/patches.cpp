#include "flairsyn/patches.hpp"

#include <stdexcept>

#include "flairsyn/tensor.hpp"

namespace flairsyn::data {

int64_t PatchLayout::patch_count() const {
  return static_cast<int64_t>(offsets[0].size()) * static_cast<int64_t>(offsets[1].size()) *
         static_cast<int64_t>(offsets[2].size());
}

std::array<int64_t, 3> PatchLayout::offset_at(int64_t index) const {
  const int64_t ny = static_cast<int64_t>(offsets[1].size());
  const int64_t nz = static_cast<int64_t>(offsets[2].size());
  if (index < 0 || index >= patch_count()) throw std::out_of_range("patch index out of range");
  return {offsets[0][static_cast<size_t>(index / (ny * nz))],
          offsets[1][static_cast<size_t>((index / nz) % ny)],
          offsets[2][static_cast<size_t>(index % nz)]};
}

PatchLayout plan_patch_layout(std::array<int64_t, 3> full_shape, std::array<int64_t, 3> patch_shape) {
  PatchLayout layout;
  layout.full_shape = full_shape;
  layout.patch_shape = patch_shape;
  for (int a = 0; a < 3; ++a) {
    if (patch_shape[a] <= 0) throw std::invalid_argument("patch shape must be positive");
    if (patch_shape[a] > full_shape[a])
      throw std::invalid_argument("patch extent " + std::to_string(patch_shape[a]) +
                                  " exceeds volume extent " + std::to_string(full_shape[a]) + " on axis " +
                                  std::to_string(a));
    for (int64_t o = 0;; o += patch_shape[a]) {
      if (o + patch_shape[a] >= full_shape[a]) {
        layout.offsets[a].push_back(full_shape[a] - patch_shape[a]);
        break;
      }
      layout.offsets[a].push_back(o);
    }
  }
  return layout;
}

std::vector<Volume> extract_patches(const Volume& v, const PatchLayout& layout) {
  if (v.shape != layout.full_shape)
    throw std::invalid_argument("volume shape " + nn::shape_str({v.shape[0], v.shape[1], v.shape[2]}) +
                                " does not match patch layout " +
                                nn::shape_str({layout.full_shape[0], layout.full_shape[1], layout.full_shape[2]}));
  std::vector<Volume> patches;
  patches.reserve(static_cast<size_t>(layout.patch_count()));
  for (int64_t i = 0; i < layout.patch_count(); ++i)
    patches.push_back(crop_at(v, layout.offset_at(i), layout.patch_shape));
  return patches;
}

Volume aggregate_patches(const std::vector<Volume>& patches, const PatchLayout& layout) {
  if (static_cast<int64_t>(patches.size()) != layout.patch_count())
    throw std::invalid_argument("expected " + std::to_string(layout.patch_count()) + " patches, got " +
                                std::to_string(patches.size()));
  Volume out;
  out.shape = layout.full_shape;
  out.voxels.assign(static_cast<size_t>(out.numel()), 0.0);
  std::vector<double> coverage(out.voxels.size(), 0.0);

  const auto [PX, PY, PZ] = layout.patch_shape;
  for (int64_t i = 0; i < layout.patch_count(); ++i) {
    const Volume& p = patches[static_cast<size_t>(i)];
    if (p.shape != layout.patch_shape)
      throw std::invalid_argument("patch " + std::to_string(i) + " has shape " +
                                  nn::shape_str({p.shape[0], p.shape[1], p.shape[2]}) + ", expected " +
                                  nn::shape_str({PX, PY, PZ}));
    if (i == 0) out.spacing_mm = p.spacing_mm;
    const auto off = layout.offset_at(i);
    for (int64_t z = 0; z < PZ; ++z)
      for (int64_t y = 0; y < PY; ++y)
        for (int64_t x = 0; x < PX; ++x) {
          const size_t oi = static_cast<size_t>(out.index(x + off[0], y + off[1], z + off[2]));
          out.voxels[oi] += p.at(x, y, z);
          coverage[oi] += 1.0;
        }
  }
  for (size_t i = 0; i < out.voxels.size(); ++i) {
    if (coverage[i] == 0.0) throw std::runtime_error("patch layout leaves voxels uncovered");
    out.voxels[i] /= coverage[i];
  }
  out.refresh_intensity_range();
  return out;
}

}  // namespace flairsyn::data
