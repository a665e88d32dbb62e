#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace flairsyn::nn {

/// Dense row-major tensor of doubles. Feature maps use the [N, C, D, H, W]
/// convention with W fastest-varying.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t ndim() const { return shape_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  /// Same storage, new shape (numel must match).
  Tensor reshaped(std::vector<int64_t> shape) const;

  void fill(double value);
  void add_(const Tensor& other);       // elementwise +=
  void scale_(double s);                // elementwise *=

  double min() const;
  double max() const;
  double sum() const;
  double mean() const;
  bool all_finite() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_numel(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

}  // namespace flairsyn::nn
