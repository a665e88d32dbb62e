#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "flairsyn/autodiff.hpp"
#include "flairsyn/nn_ops.hpp"
#include "flairsyn/rng.hpp"
#include "flairsyn/volume.hpp"

namespace testutil {

using flairsyn::Rng;
using flairsyn::nn::Tensor;
using flairsyn::nn::Var;

inline Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline flairsyn::data::Volume random_volume(std::array<int64_t, 3> shape, Rng& rng, double lo = 0.0,
                                            double hi = 1.0) {
  flairsyn::data::Volume v(shape);
  for (auto& x : v.voxels) x = rng.uniform(lo, hi);
  v.refresh_intensity_range();
  return v;
}

// Reference convolution written as plain loops, independent of the library's
// im2col path.
inline Tensor naive_conv3d(const Tensor& x, const Tensor& w, const Tensor* b, int64_t stride, int64_t pad) {
  const int64_t N = x.dim(0), Cin = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  const int64_t Cout = w.dim(0), k = w.dim(2);
  auto osize = [&](int64_t in) { return (in + 2 * pad - k) / stride + 1; };
  const int64_t Do = osize(D), Ho = osize(H), Wo = osize(W);
  Tensor out({N, Cout, Do, Ho, Wo});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t od = 0; od < Do; ++od)
        for (int64_t oh = 0; oh < Ho; ++oh)
          for (int64_t ow = 0; ow < Wo; ++ow) {
            double acc = b ? (*b)[co] : 0.0;
            for (int64_t ci = 0; ci < Cin; ++ci)
              for (int64_t kd = 0; kd < k; ++kd)
                for (int64_t kh = 0; kh < k; ++kh)
                  for (int64_t kw = 0; kw < k; ++kw) {
                    const int64_t id = od * stride - pad + kd;
                    const int64_t ih = oh * stride - pad + kh;
                    const int64_t iw = ow * stride - pad + kw;
                    if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                    acc += x[(((n * Cin + ci) * D + id) * H + ih) * W + iw] *
                           w[(((co * Cin + ci) * k + kd) * k + kh) * k + kw];
                  }
            out[(((n * Cout + co) * Do + od) * Ho + oh) * Wo + ow] = acc;
          }
  return out;
}

// Reference transposed convolution: scatter each input voxel into the output.
inline Tensor naive_conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor* b, int64_t stride,
                                     int64_t pad) {
  const int64_t N = x.dim(0), Cin = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  const int64_t Cout = w.dim(1), k = w.dim(2);
  auto osize = [&](int64_t in) { return (in - 1) * stride - 2 * pad + k; };
  const int64_t Do = osize(D), Ho = osize(H), Wo = osize(W);
  Tensor out({N, Cout, Do, Ho, Wo});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t i = 0; i < Do * Ho * Wo; ++i) out[(n * Cout + co) * Do * Ho * Wo + i] = b ? (*b)[co] : 0.0;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t ci = 0; ci < Cin; ++ci)
      for (int64_t id = 0; id < D; ++id)
        for (int64_t ih = 0; ih < H; ++ih)
          for (int64_t iw = 0; iw < W; ++iw) {
            const double xv = x[(((n * Cin + ci) * D + id) * H + ih) * W + iw];
            for (int64_t co = 0; co < Cout; ++co)
              for (int64_t kd = 0; kd < k; ++kd)
                for (int64_t kh = 0; kh < k; ++kh)
                  for (int64_t kw = 0; kw < k; ++kw) {
                    const int64_t od = id * stride - pad + kd;
                    const int64_t oh = ih * stride - pad + kh;
                    const int64_t ow = iw * stride - pad + kw;
                    if (od < 0 || od >= Do || oh < 0 || oh >= Ho || ow < 0 || ow >= Wo) continue;
                    out[(((n * Cout + co) * Do + od) * Ho + oh) * Wo + ow] +=
                        xv * w[(((ci * Cout + co) * k + kd) * k + kh) * k + kw];
                  }
          }
  return out;
}

/// Central-difference check of d(loss)/d(param[i]) for a sampled set of
/// entries. `loss` must rebuild the forward pass from current values.
inline double max_grad_rel_error(const Var& param, const std::function<double()>& loss,
                                 const Tensor& analytic, const std::vector<int64_t>& indices,
                                 double h = 1e-6) {
  double worst = 0.0;
  for (int64_t i : indices) {
    const double keep = param->value[i];
    param->value[i] = keep + h;
    const double up = loss();
    param->value[i] = keep - h;
    const double down = loss();
    param->value[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-8});
    worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
  }
  return worst;
}

inline std::vector<int64_t> sample_indices(int64_t numel, int64_t count, Rng& rng) {
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < count; ++i) idx.push_back(rng.uniform_int(0, numel - 1));
  return idx;
}

// Scratch directory under the test binary's working directory; wiped on
// construction so reruns start clean.
struct TmpDir {
  std::filesystem::path path;
  explicit TmpDir(const std::string& name)
      : path(std::filesystem::absolute(std::filesystem::path("test_tmp") / name)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string fixture_path(const std::string& name) {
  return std::string(FLAIRSYN_FIXTURE_DIR) + "/" + name;
}

}  // namespace testutil
