#pragma once

#include <vector>

#include "flairsyn/layers.hpp"

namespace flairsyn::nn {

/// Adam with decoupled weight decay: the decay multiplies parameters by
/// (1 - lr * wd) before the moment-based update, so a zero-gradient step
/// shrinks the parameter norm by exactly that factor.
class Adam {
 public:
  Adam(std::vector<Var> params, double lr, double beta1, double beta2, double weight_decay, double eps = 1e-8);

  void zero_grad();
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  // Flat state access for checkpointing, in parameter order.
  struct State {
    std::vector<Tensor> m, v;
    int64_t step_count = 0;
  };
  const State& state() const { return state_; }
  void restore_state(State state);
  size_t param_count() const { return params_.size(); }

 private:
  std::vector<Var> params_;
  double lr_, beta1_, beta2_, weight_decay_, eps_;
  State state_;
};

}  // namespace flairsyn::nn
