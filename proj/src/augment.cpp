#include "flairsyn/augment.hpp"

#include <cmath>
#include <numbers>

namespace flairsyn::data {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat3 rotation_matrix(const std::array<double, 3>& angles) {
  const double cx = std::cos(angles[0]), sx = std::sin(angles[0]);
  const double cy = std::cos(angles[1]), sy = std::sin(angles[1]);
  const double cz = std::cos(angles[2]), sz = std::sin(angles[2]);
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  return matmul(rz, matmul(ry, rx));
}

double trilinear(const Volume& v, double x, double y, double z, double fill) {
  if (x < -0.5 || y < -0.5 || z < -0.5 || x > v.shape[0] - 0.5 || y > v.shape[1] - 0.5 ||
      z > v.shape[2] - 0.5)
    return fill;
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const int64_t z0 = static_cast<int64_t>(std::floor(z));
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double fz = z - static_cast<double>(z0);

  auto sample = [&](int64_t xi, int64_t yi, int64_t zi) {
    if (xi < 0 || yi < 0 || zi < 0 || xi >= v.shape[0] || yi >= v.shape[1] || zi >= v.shape[2])
      return fill;
    return v.at(xi, yi, zi);
  };

  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
        if (w != 0.0) acc += w * sample(x0 + dx, y0 + dy, z0 + dz);
      }
  return acc;
}

}  // namespace

AugmentParams draw_augment_params(Rng& rng) {
  AugmentParams p;
  const double max_rad = kMaxRotationDeg * std::numbers::pi / 180.0;
  for (int a = 0; a < 3; ++a) p.angles_rad[a] = rng.uniform(-max_rad, max_rad);
  p.scale = rng.uniform(kMinScale, kMaxScale);
  return p;
}

Volume apply_spatial_transform(const Volume& v, const AugmentParams& params, double fill) {
  const Mat3 r = rotation_matrix(params.angles_rad);
  const std::array<double, 3> c{(v.shape[0] - 1) * 0.5, (v.shape[1] - 1) * 0.5, (v.shape[2] - 1) * 0.5};
  const double inv_scale = 1.0 / params.scale;

  Volume out = v;
  for (int64_t z = 0; z < v.shape[2]; ++z)
    for (int64_t y = 0; y < v.shape[1]; ++y)
      for (int64_t x = 0; x < v.shape[0]; ++x) {
        const double qx = (static_cast<double>(x) - c[0]) * inv_scale;
        const double qy = (static_cast<double>(y) - c[1]) * inv_scale;
        const double qz = (static_cast<double>(z) - c[2]) * inv_scale;
        // inverse of "rotate then scale": R^T applied to the unscaled offset
        const double px = r[0][0] * qx + r[1][0] * qy + r[2][0] * qz + c[0];
        const double py = r[0][1] * qx + r[1][1] * qy + r[2][1] * qz + c[1];
        const double pz = r[0][2] * qx + r[1][2] * qy + r[2][2] * qz + c[2];
        out.at(x, y, z) = trilinear(v, px, py, pz, fill);
      }
  out.refresh_intensity_range();
  return out;
}

Sample augment_sample(const Sample& s, Rng& rng) {
  const AugmentParams p = draw_augment_params(rng);
  Sample out = s;
  for (auto& v : out.sources) v = apply_spatial_transform(v, p, -1.0);
  out.target = apply_spatial_transform(out.target, p, -1.0);
  return out;
}

}  // namespace flairsyn::data
