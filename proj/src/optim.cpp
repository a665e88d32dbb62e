#include "flairsyn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace flairsyn::nn {

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double weight_decay, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {
  if (lr_ <= 0.0 && lr_ != 0.0) throw std::invalid_argument("Adam: negative learning rate");
  if (!(beta1_ > 0.0 && beta1_ < 1.0 && beta2_ > 0.0 && beta2_ < 1.0))
    throw std::invalid_argument("Adam: betas must lie in (0,1)");
  state_.m.reserve(params_.size());
  state_.v.reserve(params_.size());
  for (const auto& p : params_) {
    state_.m.emplace_back(p->value.shape());
    state_.v.emplace_back(p->value.shape());
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void Adam::step() {
  ++state_.step_count;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(state_.step_count));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(state_.step_count));
  for (size_t i = 0; i < params_.size(); ++i) {
    Variable& p = *params_[i];
    Tensor& m = state_.m[i];
    Tensor& v = state_.v[i];
    const bool has_grad = p.has_grad();
    for (int64_t j = 0; j < p.value.numel(); ++j) {
      const double g = has_grad ? p.grad[j] : 0.0;
      if (weight_decay_ != 0.0) p.value[j] *= 1.0 - lr_ * weight_decay_;
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::restore_state(State state) {
  if (state.m.size() != params_.size() || state.v.size() != params_.size())
    throw std::invalid_argument("Adam::restore_state: state size mismatch");
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!state.m[i].same_shape(params_[i]->value) || !state.v[i].same_shape(params_[i]->value))
      throw std::invalid_argument("Adam::restore_state: moment shape mismatch");
  }
  state_ = std::move(state);
}

}  // namespace flairsyn::nn
