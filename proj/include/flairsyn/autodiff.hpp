#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "flairsyn/tensor.hpp"

namespace flairsyn::nn {

struct Variable;
using Var = std::shared_ptr<Variable>;

/// Node of the dynamically built computation graph. Gradients are accumulated
/// into `grad` during backward(); `backward_fn` pushes the node's output
/// gradient to its parents.
struct Variable {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  bool grad_needed = false;  // requires_grad or depends on something that does
  int64_t id = 0;            // creation order, fixes backward traversal order
  std::vector<Var> parents;
  std::function<void(Variable&)> backward_fn;

  void ensure_grad();
  void accumulate(const Tensor& g);
  void zero_grad();
  bool has_grad() const { return grad.numel() == value.numel() && grad.numel() > 0; }
};

Var make_leaf(Tensor value, bool requires_grad = false);

/// New leaf sharing the current value of `v`, cut off from the graph.
Var detach(const Var& v);

/// True while operations should record the graph. Scoped off during
/// inference via NoGradGuard.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Creates an interior node. Parents/backward are dropped when grad mode is
/// off or no parent needs gradients.
Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Variable&)> backward_fn);

/// Reverse-mode sweep from a scalar root (numel == 1).
void backward(const Var& root);

// ---- elementwise / reduction primitives -----------------------------------

Var add(const Var& a, const Var& b);
/// Same data, new shape (numel preserved); gradient flows through unchanged.
Var reshape(const Var& a, std::vector<int64_t> shape);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// Broadcast-multiply a tensor by a scalar variable (numel 1).
Var scale_by(const Var& tensor, const Var& scalar);
Var mean_all(const Var& a);
Var sum_all(const Var& a);
/// mean(|a - b|)
Var l1_distance(const Var& a, const Var& b);
/// mean(-log(clamp(a)))
Var mean_neg_log(const Var& a);
/// mean(log(clamp(1 - a)))
Var mean_log_one_minus(const Var& a);
/// mean of -[t*log(a) + (1-t)*log(1-a)] against a constant target t.
Var bce_against_constant(const Var& scores, double target);

}  // namespace flairsyn::nn
