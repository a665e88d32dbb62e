#pragma once

#include <cstdint>
#include <vector>

#include "flairsyn/layers.hpp"

namespace flairsyn::nn {

struct TimeLag {
  int days = 0;
  double years = 0.0;  // days / 365
};

TimeLag normalize_time_lag(int days);

struct ClassLabel {
  int index = 0;          // nominal_years - 1
  int nominal_years = 1;  // in 1..n_classes
};

// Nearest whole year (ties away from zero), clamped into [1, n_classes].
ClassLabel class_from_time_lag(int days, int n_classes);

int64_t next_pow2(int64_t n);

// Output channels per transposed-conv layer, one entry per doubling. Side 128
// gets (8, 8, 8, 8, 4, 2, 1); smaller sides keep the tail of that schedule.
std::vector<int64_t> time_expander_schedule(int64_t pow2_side);

/// Grows a 1x1x1 seed holding the year-normalized lag into a single-channel
/// map of side `target_side` through kernel-4/stride-2/pad-1 transposed
/// convolutions (LeakyReLU 0.2 between layers, last layer linear). Sides that
/// are not powers of two expand to the next power of two and center-crop.
class TimeExpander {
 public:
  TimeExpander() = default;
  TimeExpander(int64_t target_side, Rng& rng);

  /// t_years: scalar variable (numel 1) -> [1, 1, S, S, S].
  Var forward(const Var& t_years) const;

  void collect(const std::string& prefix, ParamRegistry& reg);
  void train(bool) {}  // stateless w.r.t. train/eval; kept for symmetry

  int64_t target_side() const { return target_side_; }
  int64_t pow2_side() const { return pow2_side_; }
  int64_t layer_count() const { return static_cast<int64_t>(layers_.size()); }

 private:
  int64_t target_side_ = 0;
  int64_t pow2_side_ = 0;
  std::vector<ConvT3dLayer> layers_;
};

/// [N, C, D, H, W] ++ single-channel map [N, 1, D, H, W], C >= 1.
Var concat_time_channel(const Var& features, const Var& time_map);

}  // namespace flairsyn::nn
