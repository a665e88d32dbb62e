#include "flairsyn/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace flairsyn::metrics {

namespace {

constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2
constexpr double kC2 = 0.03 * 0.03;  // (K2 * L)^2

void check_pair(const data::Volume& pred, const data::Volume& ref, const char* what) {
  if (pred.shape != ref.shape)
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  if (pred.numel() == 0) throw std::invalid_argument(std::string(what) + ": empty volume");
}

std::vector<double> gaussian_window() {
  std::vector<double> k(kSsimWindow);
  const double c = (kSsimWindow - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - c;
    k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[static_cast<size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Valid-mode weighted sum along one axis of an x-fastest (X, Y, Z) grid.
std::vector<double> filter_axis(const std::vector<double>& in, std::array<int64_t, 3>& shape, int axis,
                                const std::vector<double>& kernel) {
  const int64_t K = static_cast<int64_t>(kernel.size());
  std::array<int64_t, 3> out_shape = shape;
  out_shape[static_cast<size_t>(axis)] -= K - 1;
  std::vector<double> out(static_cast<size_t>(out_shape[0] * out_shape[1] * out_shape[2]));

  const int64_t sx = 1, sy = shape[0], sz = shape[0] * shape[1];
  const int64_t stride = axis == 0 ? sx : axis == 1 ? sy : sz;
  for (int64_t z = 0; z < out_shape[2]; ++z)
    for (int64_t y = 0; y < out_shape[1]; ++y)
      for (int64_t x = 0; x < out_shape[0]; ++x) {
        const double* p = in.data() + x * sx + y * sy + z * sz;
        double acc = 0.0;
        for (int64_t i = 0; i < K; ++i) acc += kernel[static_cast<size_t>(i)] * p[i * stride];
        out[static_cast<size_t>(x + out_shape[0] * (y + out_shape[1] * z))] = acc;
      }
  shape = out_shape;
  return out;
}

std::vector<double> gaussian_filter3(const std::vector<double>& in, std::array<int64_t, 3> shape,
                                     const std::vector<double>& kernel) {
  auto s = shape;
  auto out = filter_axis(in, s, 0, kernel);
  out = filter_axis(out, s, 1, kernel);
  return filter_axis(out, s, 2, kernel);
}

}  // namespace

data::Volume rescale_unit_interval(const data::Volume& v) {
  v.validate("rescale_unit_interval");
  const double lo = v.min_intensity, hi = v.max_intensity;
  if (!(hi > lo)) throw std::invalid_argument("rescale_unit_interval: degenerate intensity range");
  data::Volume out = v;
  const double inv = 1.0 / (hi - lo);
  for (auto& x : out.voxels) x = (x - lo) * inv;
  out.refresh_intensity_range();
  out.min_intensity = 0.0;
  out.max_intensity = 1.0;
  return out;
}

double psnr(const data::Volume& pred, const data::Volume& ref) {
  check_pair(pred, ref, "psnr");
  double acc = 0.0;
  for (size_t i = 0; i < ref.voxels.size(); ++i) {
    const double d = pred.voxels[i] - ref.voxels[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(ref.voxels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double nmse(const data::Volume& pred, const data::Volume& ref) {
  check_pair(pred, ref, "nmse");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < ref.voxels.size(); ++i) {
    const double d = ref.voxels[i] - pred.voxels[i];
    num += d * d;
    den += ref.voxels[i] * ref.voxels[i];
  }
  if (den == 0.0) throw std::invalid_argument("nmse: all-zero reference");
  return num / den;
}

double ssim(const data::Volume& pred, const data::Volume& ref) {
  check_pair(pred, ref, "ssim");
  for (int a = 0; a < 3; ++a)
    if (ref.shape[static_cast<size_t>(a)] < kSsimWindow)
      throw std::invalid_argument("ssim: volume side smaller than the " + std::to_string(kSsimWindow) +
                                  "-voxel window");

  const auto kernel = gaussian_window();
  const size_t n = ref.voxels.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (size_t i = 0; i < n; ++i) {
    xx[i] = pred.voxels[i] * pred.voxels[i];
    yy[i] = ref.voxels[i] * ref.voxels[i];
    xy[i] = pred.voxels[i] * ref.voxels[i];
  }

  const auto mu_x = gaussian_filter3(pred.voxels, pred.shape, kernel);
  const auto mu_y = gaussian_filter3(ref.voxels, ref.shape, kernel);
  const auto m_xx = gaussian_filter3(xx, ref.shape, kernel);
  const auto m_yy = gaussian_filter3(yy, ref.shape, kernel);
  const auto m_xy = gaussian_filter3(xy, ref.shape, kernel);

  double acc = 0.0;
  for (size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double var_x = m_xx[i] - mx * mx;
    const double var_y = m_yy[i] - my * my;
    const double cov = m_xy[i] - mx * my;
    acc += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
           ((mx * mx + my * my + kC1) * (var_x + var_y + kC2));
  }
  return acc / static_cast<double>(mu_x.size());
}

MetricReport evaluate_pair(const data::Volume& pred, const data::Volume& ref, const std::string& volume_id) {
  const data::Volume p = rescale_unit_interval(pred);
  const data::Volume r = rescale_unit_interval(ref);
  MetricReport rep;
  rep.volume_id = volume_id;
  rep.psnr_db = psnr(p, r);
  rep.nmse = nmse(p, r);
  rep.ssim = ssim(p, r);
  return rep;
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void write_metric_csv(const std::string& path, const std::vector<MetricReport>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "volume_id,psnr_db,nmse,ssim\n";
  for (const auto& r : rows)
    f << r.volume_id << "," << format_metric(r.psnr_db) << "," << format_metric(r.nmse) << ","
      << format_metric(r.ssim) << "\n";
  if (!f) throw std::runtime_error("write failure in " + path);
}

}  // namespace flairsyn::metrics
