#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flairsyn/layers.hpp"
#include "flairsyn/time_conditioning.hpp"

namespace flairsyn::nn {

struct GeneratorConfig {
  int levels = 6;
  int64_t base_channels = 32;
  int64_t in_channels = 4;
  int64_t out_channels = 1;
  int64_t patch_side = 128;
  int64_t channel_cap_mult = 16;  // widest stage <= cap * base
};

// Spatial side at each resolution stage, full size first.
std::vector<int64_t> resolution_ladder(const GeneratorConfig& cfg);

/// Encoder/decoder with skip connections. The first block is a stride-1
/// convolution at full resolution; the expanded time map joins its output as
/// an extra channel before any downsampling. Strided kernel-4 convolutions
/// halve the side per stage going down, transposed convolutions mirror them
/// going up, and a final stride-1 convolution with tanh emits one channel.
class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, Rng& rng);

  /// source: [N, in_channels, S, S, S]; one lag per batch item.
  Var forward(const Var& source, const std::vector<double>& t_years);

  /// Same, with the lags as scalar variables so gradients can flow into t.
  Var forward(const Var& source, const std::vector<Var>& t_years);

  void train(bool training);
  void collect(const std::string& prefix, ParamRegistry& reg);
  const GeneratorConfig& config() const { return cfg_; }

 private:
  struct ConvBlock {
    Conv3dLayer conv;
    BatchNorm3dLayer bn;
  };

  Var conv_block(ConvBlock& b, const Var& x);

  GeneratorConfig cfg_;
  TimeExpander expander_;
  ConvBlock stem_;                       // full-resolution entry block
  std::vector<ConvBlock> down_;          // levels-1 stride-2 blocks
  std::vector<ConvT3dLayer> up_tconv_;   // levels-1 upsampling blocks
  std::vector<BatchNorm3dLayer> up_bn_;
  std::vector<ConvBlock> refine_;        // post-skip-merge blocks
  Conv3dLayer out_conv_;
};

enum class DiscVariant { plain, time_conditioned, acgan };

std::string variant_name(DiscVariant v);
DiscVariant variant_from_name(const std::string& name);

struct DiscriminatorConfig {
  DiscVariant variant = DiscVariant::plain;
  int64_t in_channels = 5;  // 4 source modalities + 1 candidate
  int64_t base_channels = 32;
  int stride2_blocks = 3;
  int stride1_blocks = 2;  // last one is the scoring block
  int n_classes = 0;       // acgan only
  int64_t patch_side = 128;
};

// Side of the real/fake score grid produced by the block stack.
int64_t score_grid_side(const DiscriminatorConfig& cfg);

struct DiscOutput {
  Var scores;                    // [N, 1, g, g, g], values in (0, 1)
  Var class_posterior;           // [N, n_classes] rows summing to 1; acgan only
};

/// Kernel-4 stack: stride-2 blocks, then stride-1 blocks, sigmoid score map.
/// Batch normalization everywhere except the first and scoring blocks. The
/// time-conditioned variant concatenates the expanded lag after the first
/// block; the acgan variant pools the last shared feature map into a softmax
/// class posterior.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& cfg, Rng& rng);

  /// source: [N, 4, S, S, S], candidate: [N, 1, S, S, S]. t_years must be
  /// supplied exactly when variant == time_conditioned (one lag per item).
  DiscOutput forward(const Var& source, const Var& candidate,
                     const std::optional<std::vector<double>>& t_years = std::nullopt);

  void train(bool training);
  void collect(const std::string& prefix, ParamRegistry& reg);
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  TimeExpander expander_;  // time_conditioned only, target side S/2
  std::vector<Conv3dLayer> convs_;
  std::vector<BatchNorm3dLayer> bns_;  // for middle blocks
  std::vector<bool> has_bn_;
  std::vector<int64_t> strides_;
  LinearLayer class_head_;  // acgan only
};

}  // namespace flairsyn::nn
