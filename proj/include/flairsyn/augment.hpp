#pragma once

#include <array>

#include "flairsyn/pairs_folds.hpp"
#include "flairsyn/rng.hpp"
#include "flairsyn/volume.hpp"

namespace flairsyn::data {

struct AugmentParams {
  std::array<double, 3> angles_rad{0.0, 0.0, 0.0};  // about x, y, z
  double scale = 1.0;
};

inline constexpr double kMaxRotationDeg = 12.0;
inline constexpr double kMinScale = 0.9;
inline constexpr double kMaxScale = 1.1;

AugmentParams draw_augment_params(Rng& rng);

// Rotates (Rz*Ry*Rx) then scales isotropically about the volume center,
// trilinear resampling, fill value for regions pulled in from outside.
Volume apply_spatial_transform(const Volume& v, const AugmentParams& params, double fill);

// One shared transform across all 4 source volumes and the target; the lag
// and class label pass through untouched.
Sample augment_sample(const Sample& s, Rng& rng);

}  // namespace flairsyn::data
