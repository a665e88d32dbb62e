#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "flairsyn/autodiff.hpp"

namespace flairsyn::nn {

int64_t conv_out_size(int64_t in, int64_t k, int64_t stride, int64_t pad);
int64_t tconv_out_size(int64_t in, int64_t k, int64_t stride, int64_t pad);

/// x: [N, Cin, D, H, W], w: [Cout, Cin, k, k, k], b: [Cout] (may be null).
Var conv3d(const Var& x, const Var& w, const Var& b, int64_t stride, int64_t pad);

/// x: [N, Cin, D, H, W], w: [Cin, Cout, k, k, k], b: [Cout] (may be null).
/// Output spatial size: (in - 1) * stride - 2 * pad + k.
Var conv_transpose3d(const Var& x, const Var& w, const Var& b, int64_t stride, int64_t pad);

/// Per-channel batch normalization over (N, D, H, W). In training mode uses
/// batch statistics and updates the running buffers in place; in eval mode
/// uses the running buffers. Differentiable in both modes.
Var batch_norm3d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
                 bool training, double momentum = 0.1, double eps = 1e-5);

Var leaky_relu(const Var& x, double slope);
Var tanh_op(const Var& x);
Var sigmoid(const Var& x);

/// [N, C1, D, H, W] ++ [N, C2, D, H, W] -> [N, C1+C2, D, H, W]; existing
/// channels are carried over bit-exactly.
Var concat_channels(const Var& a, const Var& b);

/// Joins same-shaped tensors along dim 0 (each item typically [1, C, D, H, W]).
Var stack_batch(const std::vector<Var>& items);

/// Spatial slice of a [N, C, D, H, W] tensor.
Var crop_spatial(const Var& x, std::array<int64_t, 3> start, std::array<int64_t, 3> size);

/// [N, C, D, H, W] -> [N, C], mean over the spatial extent.
Var global_avg_pool(const Var& x);

/// x: [N, F], w: [K, F], b: [K] -> [N, K].
Var linear(const Var& x, const Var& w, const Var& b);

/// Row-wise softmax of a [N, K] tensor.
Var softmax_rows(const Var& x);

/// Mean over rows of -log(probs[n, labels[n]]).
Var cross_entropy_from_probs(const Var& probs, const std::vector<int>& labels);

}  // namespace flairsyn::nn
