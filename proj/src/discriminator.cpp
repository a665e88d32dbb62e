#include "flairsyn/models.hpp"

#include <algorithm>
#include <stdexcept>

namespace flairsyn::nn {

namespace {
constexpr double kSlope = 0.2;
constexpr int64_t kWidthCapMult = 8;
}  // namespace

std::string variant_name(DiscVariant v) {
  switch (v) {
    case DiscVariant::plain: return "plain";
    case DiscVariant::time_conditioned: return "time_conditioned";
    case DiscVariant::acgan: return "acgan";
  }
  throw std::logic_error("unknown discriminator variant");
}

DiscVariant variant_from_name(const std::string& name) {
  if (name == "plain") return DiscVariant::plain;
  if (name == "time_conditioned") return DiscVariant::time_conditioned;
  if (name == "acgan") return DiscVariant::acgan;
  throw std::invalid_argument("unknown discriminator variant '" + name + "'");
}

int64_t score_grid_side(const DiscriminatorConfig& cfg) {
  int64_t s = cfg.patch_side;
  for (int i = 0; i < cfg.stride2_blocks; ++i) s = conv_out_size(s, 4, 2, 1);
  for (int i = 0; i < cfg.stride1_blocks; ++i) s = conv_out_size(s, 4, 1, 1);
  if (s < 1) throw std::invalid_argument("discriminator stack collapses below one score cell");
  return s;
}

Discriminator::Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.stride2_blocks < 1 || cfg.stride1_blocks < 1)
    throw std::invalid_argument("discriminator needs at least one stride-2 and one stride-1 block");
  if (cfg.in_channels < 2) throw std::invalid_argument("discriminator sees source plus candidate channels");
  if (cfg.variant == DiscVariant::acgan && cfg.n_classes < 2)
    throw std::invalid_argument("auxiliary classifier needs at least 2 classes");
  score_grid_side(cfg);  // validates the stack against the patch side

  const int total = cfg.stride2_blocks + cfg.stride1_blocks;
  const int64_t cap = kWidthCapMult * cfg.base_channels;
  int64_t prev = cfg.in_channels;
  int64_t width = cfg.base_channels;
  for (int i = 0; i < total; ++i) {
    const bool last = i == total - 1;
    const int64_t stride = i < cfg.stride2_blocks ? 2 : 1;
    const int64_t out = last ? 1 : width;
    convs_.emplace_back(prev, out, 4, stride, 1, rng);
    strides_.push_back(stride);
    const bool with_bn = !last && i != 0;
    has_bn_.push_back(with_bn);
    bns_.emplace_back(with_bn ? out : 1);
    prev = out;
    if (i == 0 && cfg.variant == DiscVariant::time_conditioned) prev += 1;
    if (!last) width = std::min(width * 2, cap);
  }

  if (cfg.variant == DiscVariant::time_conditioned) {
    const int64_t side_after_first = conv_out_size(cfg.patch_side, 4, 2, 1);
    expander_ = TimeExpander(side_after_first, rng);
  }
  if (cfg.variant == DiscVariant::acgan) {
    const int64_t trunk_width = convs_[convs_.size() - 2].w->value.dim(0);
    class_head_ = LinearLayer(trunk_width, cfg.n_classes, rng);
  }
}

DiscOutput Discriminator::forward(const Var& source, const Var& candidate,
                                  const std::optional<std::vector<double>>& t_years) {
  const auto& ss = source->value.shape();
  const auto& cs = candidate->value.shape();
  if (ss.size() != 5 || cs.size() != 5)
    throw std::invalid_argument("discriminator expects [N, C, S, S, S] tensors");
  if (ss[1] + cs[1] != cfg_.in_channels)
    throw std::invalid_argument("discriminator configured for " + std::to_string(cfg_.in_channels) +
                                " channels, got " + std::to_string(ss[1] + cs[1]));
  if (ss[2] != cfg_.patch_side || ss[3] != cfg_.patch_side || ss[4] != cfg_.patch_side)
    throw std::invalid_argument("discriminator configured for side " + std::to_string(cfg_.patch_side) +
                                ", got " + shape_str(ss));

  if (cfg_.variant == DiscVariant::time_conditioned) {
    if (!t_years) throw std::invalid_argument("time-conditioned discriminator requires a time lag");
    if (static_cast<int64_t>(t_years->size()) != ss[0])
      throw std::invalid_argument("need one time lag per batch item");
  } else if (t_years) {
    throw std::invalid_argument(variant_name(cfg_.variant) + " discriminator does not accept a time lag");
  }

  Var x = concat_channels(source, candidate);
  Var trunk;  // last shared feature map, feeds the class head
  for (size_t i = 0; i < convs_.size(); ++i) {
    const bool last = i + 1 == convs_.size();
    x = convs_[i].forward(x);
    if (last) break;
    if (has_bn_[i]) x = bns_[i].forward(x);
    x = leaky_relu(x, kSlope);
    if (i == 0 && cfg_.variant == DiscVariant::time_conditioned) {
      std::vector<Var> maps;
      for (double t : *t_years) {
        if (!(t > 0.0)) throw std::invalid_argument("time lag in years must be positive");
        maps.push_back(expander_.forward(make_leaf(Tensor::scalar(t))));
      }
      x = concat_time_channel(x, maps.size() == 1 ? maps[0] : stack_batch(maps));
    }
    trunk = x;
  }

  DiscOutput out;
  out.scores = sigmoid(x);
  if (cfg_.variant == DiscVariant::acgan)
    out.class_posterior = softmax_rows(class_head_.forward(global_avg_pool(trunk)));
  return out;
}

void Discriminator::train(bool training) {
  for (size_t i = 0; i < bns_.size(); ++i)
    if (has_bn_[i]) bns_[i].training = training;
}

void Discriminator::collect(const std::string& prefix, ParamRegistry& reg) {
  if (cfg_.variant == DiscVariant::time_conditioned) expander_.collect(prefix + ".time", reg);
  for (size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(prefix + ".block" + std::to_string(i) + ".conv", reg);
    if (has_bn_[i]) bns_[i].collect(prefix + ".block" + std::to_string(i) + ".bn", reg);
  }
  if (cfg_.variant == DiscVariant::acgan) class_head_.collect(prefix + ".cls", reg);
}

}  // namespace flairsyn::nn
