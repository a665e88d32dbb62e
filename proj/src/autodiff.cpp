#include "flairsyn/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace flairsyn::nn {

namespace {
std::atomic<int64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

constexpr double kLogClamp = 1e-12;

double clamped(double p) { return std::min(std::max(p, kLogClamp), 1.0 - kLogClamp); }

void check_unit_scores(const Tensor& t, const char* what) {
  for (int64_t i = 0; i < t.numel(); ++i) {
    double v = t[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(what) + ": score outside (0,1): " + std::to_string(v));
  }
}
}  // namespace

void Variable::ensure_grad() {
  if (!has_grad()) grad = Tensor(value.shape());
}

void Variable::accumulate(const Tensor& g) {
  ensure_grad();
  grad.add_(g);
}

void Variable::zero_grad() {
  if (has_grad()) grad.fill(0.0);
}

Var make_leaf(Tensor value, bool requires_grad) {
  auto v = std::make_shared<Variable>();
  v->value = std::move(value);
  v->requires_grad = requires_grad;
  v->grad_needed = requires_grad;
  v->id = g_next_id.fetch_add(1);
  return v;
}

Var detach(const Var& v) { return make_leaf(v->value, false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Variable&)> backward_fn) {
  auto v = std::make_shared<Variable>();
  v->value = std::move(value);
  v->id = g_next_id.fetch_add(1);
  bool needed = false;
  if (g_grad_enabled) {
    for (const auto& p : parents)
      if (p && p->grad_needed) needed = true;
  }
  if (needed) {
    v->grad_needed = true;
    v->parents = std::move(parents);
    v->backward_fn = std::move(backward_fn);
  }
  return v;
}

void backward(const Var& root) {
  if (!root) throw std::invalid_argument("backward: null root");
  if (root->value.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
  // Collect reachable nodes; process in reverse creation order so every
  // node's output gradient is complete before its backward_fn runs.
  std::vector<Variable*> order;
  std::unordered_set<Variable*> seen;
  std::vector<Var> stack{root};
  while (!stack.empty()) {
    Var v = stack.back();
    stack.pop_back();
    if (!v || !v->grad_needed) continue;
    if (!seen.insert(v.get()).second) continue;
    order.push_back(v.get());
    for (const auto& p : v->parents) stack.push_back(p);
  }
  std::sort(order.begin(), order.end(), [](const Variable* a, const Variable* b) { return a->id > b->id; });
  root->ensure_grad();
  root->grad.fill(1.0);
  for (Variable* v : order) {
    if (v->backward_fn && v->has_grad()) v->backward_fn(*v);
  }
}

// ---- elementwise / reduction primitives -----------------------------------

Var add(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = a->value;
  out.add_(b->value);
  return make_node(std::move(out), {a, b}, [a, b](Variable& self) {
    if (a->grad_needed) a->accumulate(self.grad);
    if (b->grad_needed) b->accumulate(self.grad);
  });
}

Var reshape(const Var& a, std::vector<int64_t> shape) {
  Tensor out = a->value.reshaped(shape);
  return make_node(std::move(out), {a}, [a](Variable& self) {
    if (a->grad_needed) a->accumulate(self.grad.reshaped(a->value.shape()));
  });
}

Var sub(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Variable& self) {
    if (a->grad_needed) a->accumulate(self.grad);
    if (b->grad_needed) {
      Tensor g = self.grad;
      g.scale_(-1.0);
      b->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Variable& self) {
    if (a->grad_needed) {
      Tensor g(self.grad.shape());
      for (int64_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * b->value[i];
      a->accumulate(g);
    }
    if (b->grad_needed) {
      Tensor g(self.grad.shape());
      for (int64_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * a->value[i];
      b->accumulate(g);
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  out.scale_(s);
  return make_node(std::move(out), {a}, [a, s](Variable& self) {
    if (!a->grad_needed) return;
    Tensor g = self.grad;
    g.scale_(s);
    a->accumulate(g);
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  return make_node(std::move(out), {a}, [a](Variable& self) {
    if (a->grad_needed) a->accumulate(self.grad);
  });
}

Var scale_by(const Var& tensor, const Var& scalar) {
  if (scalar->value.numel() != 1) throw std::invalid_argument("scale_by: scalar must have one element");
  double s = scalar->value[0];
  Tensor out = tensor->value;
  out.scale_(s);
  return make_node(std::move(out), {tensor, scalar}, [tensor, scalar, s](Variable& self) {
    if (tensor->grad_needed) {
      Tensor g = self.grad;
      g.scale_(s);
      tensor->accumulate(g);
    }
    if (scalar->grad_needed) {
      double acc = 0.0;
      for (int64_t i = 0; i < self.grad.numel(); ++i) acc += self.grad[i] * tensor->value[i];
      Tensor g({1});
      g[0] = acc;
      scalar->accumulate(g);
    }
  });
}

Var mean_all(const Var& a) {
  const int64_t n = a->value.numel();
  if (n == 0) throw std::invalid_argument("mean_all: empty tensor");
  Tensor out({1});
  out[0] = a->value.mean();
  return make_node(std::move(out), {a}, [a, n](Variable& self) {
    if (!a->grad_needed) return;
    Tensor g(a->value.shape());
    const double gv = self.grad[0] / static_cast<double>(n);
    g.fill(gv);
    a->accumulate(g);
  });
}

Var sum_all(const Var& a) {
  Tensor out({1});
  out[0] = a->value.sum();
  return make_node(std::move(out), {a}, [a](Variable& self) {
    if (!a->grad_needed) return;
    Tensor g(a->value.shape());
    g.fill(self.grad[0]);
    a->accumulate(g);
  });
}

Var l1_distance(const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value)) throw std::invalid_argument("l1_distance: shape mismatch");
  const int64_t n = a->value.numel();
  Tensor out({1});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::abs(a->value[i] - b->value[i]);
  out[0] = acc / static_cast<double>(n);
  return make_node(std::move(out), {a, b}, [a, b, n](Variable& self) {
    const double gv = self.grad[0] / static_cast<double>(n);
    Tensor ga(a->value.shape());
    for (int64_t i = 0; i < n; ++i) {
      double d = a->value[i] - b->value[i];
      ga[i] = gv * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
    if (b->grad_needed) {
      Tensor gb = ga;
      gb.scale_(-1.0);
      b->accumulate(gb);
    }
    if (a->grad_needed) a->accumulate(ga);
  });
}

Var mean_neg_log(const Var& a) {
  check_unit_scores(a->value, "mean_neg_log");
  const int64_t n = a->value.numel();
  Tensor out({1});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc -= std::log(clamped(a->value[i]));
  out[0] = acc / static_cast<double>(n);
  return make_node(std::move(out), {a}, [a, n](Variable& self) {
    if (!a->grad_needed) return;
    const double gv = self.grad[0] / static_cast<double>(n);
    Tensor g(a->value.shape());
    for (int64_t i = 0; i < n; ++i) g[i] = -gv / clamped(a->value[i]);
    a->accumulate(g);
  });
}

Var mean_log_one_minus(const Var& a) {
  check_unit_scores(a->value, "mean_log_one_minus");
  const int64_t n = a->value.numel();
  Tensor out({1});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += std::log(clamped(1.0 - a->value[i]));
  out[0] = acc / static_cast<double>(n);
  return make_node(std::move(out), {a}, [a, n](Variable& self) {
    if (!a->grad_needed) return;
    const double gv = self.grad[0] / static_cast<double>(n);
    Tensor g(a->value.shape());
    for (int64_t i = 0; i < n; ++i) g[i] = -gv / clamped(1.0 - a->value[i]);
    a->accumulate(g);
  });
}

Var bce_against_constant(const Var& scores, double target) {
  check_unit_scores(scores->value, "bce_against_constant");
  if (!(target >= 0.0 && target <= 1.0)) throw std::invalid_argument("bce_against_constant: target outside [0,1]");
  const int64_t n = scores->value.numel();
  Tensor out({1});
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double p = clamped(scores->value[i]);
    acc -= target * std::log(p) + (1.0 - target) * std::log(1.0 - p);
  }
  out[0] = acc / static_cast<double>(n);
  return make_node(std::move(out), {scores}, [scores, target, n](Variable& self) {
    if (!scores->grad_needed) return;
    const double gv = self.grad[0] / static_cast<double>(n);
    Tensor g(scores->value.shape());
    for (int64_t i = 0; i < n; ++i) {
      double p = clamped(scores->value[i]);
      g[i] = gv * (-target / p + (1.0 - target) / (1.0 - p));
    }
    scores->accumulate(g);
  });
}

}  // namespace flairsyn::nn
