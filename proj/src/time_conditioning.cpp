#include "flairsyn/time_conditioning.hpp"

#include <cmath>
#include <stdexcept>

namespace flairsyn::nn {

TimeLag normalize_time_lag(int days) {
  if (days <= 0) throw std::invalid_argument("time lag must be positive, got " + std::to_string(days) + " days");
  return {days, static_cast<double>(days) / 365.0};
}

ClassLabel class_from_time_lag(int days, int n_classes) {
  if (n_classes < 1) throw std::invalid_argument("need at least one class");
  const TimeLag lag = normalize_time_lag(days);
  long y = std::lround(lag.years);
  if (y < 1) y = 1;
  if (y > n_classes) y = n_classes;
  ClassLabel c;
  c.nominal_years = static_cast<int>(y);
  c.index = c.nominal_years - 1;
  return c;
}

int64_t next_pow2(int64_t n) {
  if (n < 1) throw std::invalid_argument("next_pow2: need a positive side");
  int64_t p = 1;
  while (p < n) p *= 2;
  return p;
}

std::vector<int64_t> time_expander_schedule(int64_t pow2_side) {
  if (pow2_side < 1 || (pow2_side & (pow2_side - 1)) != 0)
    throw std::invalid_argument("time expander side must be a power of two, got " + std::to_string(pow2_side));
  int layers = 0;
  for (int64_t s = pow2_side; s > 1; s /= 2) ++layers;
  const std::vector<int64_t> base{8, 8, 8, 8, 4, 2, 1};
  std::vector<int64_t> sched;
  for (int i = 0; i < layers - static_cast<int>(base.size()); ++i) sched.push_back(base.front());
  const int take = std::min(layers, static_cast<int>(base.size()));
  sched.insert(sched.end(), base.end() - take, base.end());
  return sched;
}

TimeExpander::TimeExpander(int64_t target_side, Rng& rng) : target_side_(target_side) {
  pow2_side_ = next_pow2(target_side);
  const auto sched = time_expander_schedule(pow2_side_);
  int64_t cin = 1;
  for (size_t i = 0; i < sched.size(); ++i) {
    layers_.emplace_back(cin, sched[i], 4, 2, 1, rng);
    cin = sched[i];
  }
}

Var TimeExpander::forward(const Var& t_years) const {
  if (target_side_ == 0) throw std::runtime_error("time expander is unconfigured");
  if (t_years->value.numel() != 1) throw std::invalid_argument("time expander seed must be a scalar");
  Var x = reshape(t_years, {1, 1, 1, 1, 1});
  for (size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x);
    if (i + 1 < layers_.size()) x = leaky_relu(x, 0.2);
  }
  if (pow2_side_ != target_side_) {
    const int64_t off = (pow2_side_ - target_side_) / 2;
    x = crop_spatial(x, {off, off, off}, {target_side_, target_side_, target_side_});
  }
  return x;
}

void TimeExpander::collect(const std::string& prefix, ParamRegistry& reg) {
  for (size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + ".up" + std::to_string(i), reg);
}

Var concat_time_channel(const Var& features, const Var& time_map) {
  if (features->value.ndim() != 5 || time_map->value.ndim() != 5)
    throw std::invalid_argument("concat_time_channel expects [N, C, D, H, W] tensors");
  if (time_map->value.dim(1) != 1) throw std::invalid_argument("time map must have one channel");
  for (size_t d : {size_t{0}, size_t{2}, size_t{3}, size_t{4}})
    if (features->value.dim(d) != time_map->value.dim(d))
      throw std::invalid_argument("time map shape " + shape_str(time_map->value.shape()) +
                                  " does not align with features " + shape_str(features->value.shape()));
  return concat_channels(features, time_map);
}

}  // namespace flairsyn::nn
