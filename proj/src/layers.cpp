#include "flairsyn/layers.hpp"

namespace flairsyn::nn {

namespace {
Tensor gaussian_init(std::vector<int64_t> shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}
}  // namespace

void set_requires_grad(const std::vector<Var>& params, bool value) {
  for (const auto& p : params) {
    p->requires_grad = value;
    p->grad_needed = value;
  }
}

int64_t param_count(const ParamRegistry& reg) {
  int64_t n = 0;
  for (const auto& p : reg.params) n += p.var->value.numel();
  return n;
}

Conv3dLayer::Conv3dLayer(int64_t cin, int64_t cout, int64_t k_, int64_t stride_, int64_t pad_, Rng& rng, bool bias,
                         double init_std)
    : k(k_), stride(stride_), pad(pad_) {
  w = make_leaf(gaussian_init({cout, cin, k, k, k}, rng, init_std), true);
  if (bias) b = make_leaf(Tensor({cout}), true);
}

void Conv3dLayer::collect(const std::string& prefix, ParamRegistry& reg) {
  reg.params.push_back({prefix + ".w", w});
  if (b) reg.params.push_back({prefix + ".b", b});
}

ConvT3dLayer::ConvT3dLayer(int64_t cin, int64_t cout, int64_t k_, int64_t stride_, int64_t pad_, Rng& rng, bool bias,
                           double init_std)
    : k(k_), stride(stride_), pad(pad_) {
  w = make_leaf(gaussian_init({cin, cout, k, k, k}, rng, init_std), true);
  if (bias) b = make_leaf(Tensor({cout}), true);
}

void ConvT3dLayer::collect(const std::string& prefix, ParamRegistry& reg) {
  reg.params.push_back({prefix + ".w", w});
  if (b) reg.params.push_back({prefix + ".b", b});
}

BatchNorm3dLayer::BatchNorm3dLayer(int64_t channels) {
  gamma = make_leaf(Tensor::full({channels}, 1.0), true);
  beta = make_leaf(Tensor({channels}), true);
  running_mean = Tensor({channels});
  running_var = Tensor::full({channels}, 1.0);
}

void BatchNorm3dLayer::collect(const std::string& prefix, ParamRegistry& reg) {
  reg.params.push_back({prefix + ".gamma", gamma});
  reg.params.push_back({prefix + ".beta", beta});
  reg.buffers.push_back({prefix + ".running_mean", &running_mean});
  reg.buffers.push_back({prefix + ".running_var", &running_var});
}

LinearLayer::LinearLayer(int64_t in_features, int64_t out_features, Rng& rng, double init_std) {
  w = make_leaf(gaussian_init({out_features, in_features}, rng, init_std), true);
  b = make_leaf(Tensor({out_features}), true);
}

void LinearLayer::collect(const std::string& prefix, ParamRegistry& reg) {
  reg.params.push_back({prefix + ".w", w});
  reg.params.push_back({prefix + ".b", b});
}

}  // namespace flairsyn::nn
