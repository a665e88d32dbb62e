#include "flairsyn/models.hpp"

#include <algorithm>
#include <stdexcept>

namespace flairsyn::nn {

namespace {
constexpr double kSlope = 0.2;

int64_t stage_channels(const GeneratorConfig& cfg, int stage) {
  const int64_t cap = cfg.channel_cap_mult * cfg.base_channels;
  int64_t c = cfg.base_channels;
  for (int i = 0; i < stage; ++i) c = std::min(c * 2, cap);
  return c;
}
}  // namespace

std::vector<int64_t> resolution_ladder(const GeneratorConfig& cfg) {
  if (cfg.levels < 2) throw std::invalid_argument("generator needs at least 2 levels");
  const int64_t halvings = int64_t{1} << (cfg.levels - 1);
  if (cfg.patch_side % halvings != 0)
    throw std::invalid_argument("patch side " + std::to_string(cfg.patch_side) + " is not divisible by " +
                                std::to_string(halvings) + " (2^(levels-1))");
  std::vector<int64_t> ladder;
  int64_t s = cfg.patch_side;
  for (int i = 0; i < cfg.levels; ++i) {
    ladder.push_back(s);
    s /= 2;
  }
  return ladder;
}

Generator::Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
  resolution_ladder(cfg);  // validates levels/side
  if (cfg.in_channels < 1 || cfg.out_channels < 1) throw std::invalid_argument("generator channel counts must be positive");
  if (cfg.base_channels < 1) throw std::invalid_argument("generator base_channels must be positive");

  expander_ = TimeExpander(cfg.patch_side, rng);

  stem_.conv = Conv3dLayer(cfg.in_channels, cfg.base_channels, 3, 1, 1, rng);
  stem_.bn = BatchNorm3dLayer(cfg.base_channels);

  // Stage i lives at side patch/2^i; stage 0 carries base+1 channels once the
  // time map has joined.
  int64_t prev = cfg.base_channels + 1;
  for (int i = 1; i < cfg.levels; ++i) {
    ConvBlock b;
    b.conv = Conv3dLayer(prev, stage_channels(cfg, i), 4, 2, 1, rng);
    b.bn = BatchNorm3dLayer(stage_channels(cfg, i));
    down_.push_back(std::move(b));
    prev = stage_channels(cfg, i);
  }

  for (int i = cfg.levels - 1; i >= 1; --i) {
    const int64_t into = i == 1 ? cfg.base_channels : stage_channels(cfg, i - 1);
    up_tconv_.emplace_back(prev, into, 4, 2, 1, rng);
    up_bn_.emplace_back(into);
    const int64_t skip = i == 1 ? cfg.base_channels + 1 : stage_channels(cfg, i - 1);
    ConvBlock r;
    r.conv = Conv3dLayer(into + skip, into, 3, 1, 1, rng);
    r.bn = BatchNorm3dLayer(into);
    refine_.push_back(std::move(r));
    prev = into;
  }

  out_conv_ = Conv3dLayer(cfg.base_channels, cfg.out_channels, 3, 1, 1, rng);
}

Var Generator::conv_block(ConvBlock& b, const Var& x) {
  return leaky_relu(b.bn.forward(b.conv.forward(x)), kSlope);
}

Var Generator::forward(const Var& source, const std::vector<double>& t_years) {
  std::vector<Var> lags;
  lags.reserve(t_years.size());
  for (double t : t_years) {
    if (!(t > 0.0)) throw std::invalid_argument("time lag in years must be positive");
    lags.push_back(make_leaf(Tensor::scalar(t)));
  }
  return forward(source, lags);
}

Var Generator::forward(const Var& source, const std::vector<Var>& t_years) {
  const auto& s = source->value.shape();
  if (s.size() != 5 || s[1] != cfg_.in_channels)
    throw std::invalid_argument("generator expects [N, " + std::to_string(cfg_.in_channels) +
                                ", S, S, S] input, got " + shape_str(s));
  if (s[2] != cfg_.patch_side || s[3] != cfg_.patch_side || s[4] != cfg_.patch_side)
    throw std::invalid_argument("generator configured for side " + std::to_string(cfg_.patch_side) +
                                ", got " + shape_str(s));
  if (static_cast<int64_t>(t_years.size()) != s[0])
    throw std::invalid_argument("need one time lag per batch item");

  std::vector<Var> maps;
  maps.reserve(t_years.size());
  for (const Var& t : t_years) {
    if (t->value.numel() != 1) throw std::invalid_argument("each time lag must be a scalar");
    maps.push_back(expander_.forward(t));
  }
  const Var time_map = maps.size() == 1 ? maps[0] : stack_batch(maps);

  std::vector<Var> skips;
  Var x = conv_block(stem_, source);
  x = concat_time_channel(x, time_map);
  skips.push_back(x);
  for (auto& b : down_) {
    x = conv_block(b, x);
    skips.push_back(x);
  }

  for (size_t u = 0; u < up_tconv_.size(); ++u) {
    x = leaky_relu(up_bn_[u].forward(up_tconv_[u].forward(x)), kSlope);
    const Var& skip = skips[skips.size() - 2 - u];
    x = concat_channels(x, skip);
    x = conv_block(refine_[u], x);
  }
  return tanh_op(out_conv_.forward(x));
}

void Generator::train(bool training) {
  stem_.bn.training = training;
  for (auto& b : down_) b.bn.training = training;
  for (auto& bn : up_bn_) bn.training = training;
  for (auto& b : refine_) b.bn.training = training;
}

void Generator::collect(const std::string& prefix, ParamRegistry& reg) {
  expander_.collect(prefix + ".time", reg);
  stem_.conv.collect(prefix + ".stem.conv", reg);
  stem_.bn.collect(prefix + ".stem.bn", reg);
  for (size_t i = 0; i < down_.size(); ++i) {
    down_[i].conv.collect(prefix + ".down" + std::to_string(i) + ".conv", reg);
    down_[i].bn.collect(prefix + ".down" + std::to_string(i) + ".bn", reg);
  }
  for (size_t i = 0; i < up_tconv_.size(); ++i) {
    up_tconv_[i].collect(prefix + ".up" + std::to_string(i) + ".tconv", reg);
    up_bn_[i].collect(prefix + ".up" + std::to_string(i) + ".bn", reg);
    refine_[i].conv.collect(prefix + ".up" + std::to_string(i) + ".refine.conv", reg);
    refine_[i].bn.collect(prefix + ".up" + std::to_string(i) + ".refine.bn", reg);
  }
  out_conv_.collect(prefix + ".out", reg);
}

}  // namespace flairsyn::nn
