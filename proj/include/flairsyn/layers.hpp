#pragma once

#include <string>
#include <vector>

#include "flairsyn/nn_ops.hpp"
#include "flairsyn/rng.hpp"

namespace flairsyn::nn {

struct NamedParam {
  std::string name;
  Var var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

/// Flat view of a network's learnable parameters and persistent buffers,
/// in deterministic registration order (used by the optimizer and the
/// checkpoint writer).
struct ParamRegistry {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;

  std::vector<Var> vars() const {
    std::vector<Var> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.var);
    return out;
  }
};

void set_requires_grad(const std::vector<Var>& params, bool value);
int64_t param_count(const ParamRegistry& reg);

constexpr double kInitStd = 0.02;  // zero-mean Gaussian init for conv weights

struct Conv3dLayer {
  int64_t k = 0, stride = 1, pad = 0;
  Var w, b;

  Conv3dLayer() = default;
  Conv3dLayer(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad, Rng& rng, bool bias = true,
              double init_std = kInitStd);
  Var forward(const Var& x) const { return conv3d(x, w, b, stride, pad); }
  void collect(const std::string& prefix, ParamRegistry& reg);
};

struct ConvT3dLayer {
  int64_t k = 0, stride = 1, pad = 0;
  Var w, b;

  ConvT3dLayer() = default;
  ConvT3dLayer(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad, Rng& rng, bool bias = true,
               double init_std = kInitStd);
  Var forward(const Var& x) const { return conv_transpose3d(x, w, b, stride, pad); }
  void collect(const std::string& prefix, ParamRegistry& reg);
};

struct BatchNorm3dLayer {
  Var gamma, beta;
  Tensor running_mean, running_var;
  bool training = true;

  BatchNorm3dLayer() = default;
  explicit BatchNorm3dLayer(int64_t channels);
  Var forward(const Var& x) { return batch_norm3d(x, gamma, beta, running_mean, running_var, training); }
  void collect(const std::string& prefix, ParamRegistry& reg);
};

struct LinearLayer {
  Var w, b;

  LinearLayer() = default;
  LinearLayer(int64_t in_features, int64_t out_features, Rng& rng, double init_std = kInitStd);
  Var forward(const Var& x) const { return linear(x, w, b); }
  void collect(const std::string& prefix, ParamRegistry& reg);
};

}  // namespace flairsyn::nn
