#pragma once

#include <string>
#include <vector>

#include "flairsyn/volume.hpp"

namespace flairsyn::metrics {

/// (v - min) / (max - min); output attains 0 and 1.
data::Volume rescale_unit_interval(const data::Volume& v);

// All three expect same-shaped volumes with values in [0, 1].
double psnr(const data::Volume& pred, const data::Volume& ref);  // dB, +inf when identical
double nmse(const data::Volume& pred, const data::Volume& ref);

/// Mean of the local SSIM map over all valid window positions; 3D Gaussian
/// window of size 11, sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const data::Volume& pred, const data::Volume& ref);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct MetricReport {
  std::string volume_id;
  double psnr_db = 0.0;
  double nmse = 0.0;
  double ssim = 0.0;
};

/// Rescales each volume to [0, 1] independently, then computes all metrics.
MetricReport evaluate_pair(const data::Volume& pred, const data::Volume& ref,
                           const std::string& volume_id = "");

std::string format_metric(double v);  // +inf renders as "inf"
void write_metric_csv(const std::string& path, const std::vector<MetricReport>& rows);

}  // namespace flairsyn::metrics
