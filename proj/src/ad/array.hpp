#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace covbench::ad {

// Dense row-major array of 64-bit reals. Rank 0 is a scalar (size 1).
class Array {
 public:
  Array() = default;
  explicit Array(std::vector<int64_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}
  Array(std::vector<int64_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_sizes();
  }

  static Array scalar(double v) { return Array({}, {v}); }
  static Array zeros(std::vector<int64_t> shape) { return Array(std::move(shape)); }
  static Array full(std::vector<int64_t> shape, double v) {
    Array a(std::move(shape));
    for (auto& x : a.data_) x = v;
    return a;
  }
  static Array vec(std::vector<double> data) {
    const auto n = static_cast<int64_t>(data.size());
    return Array({n}, std::move(data));
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<const double> cspan() const { return {data_.data(), data_.size()}; }
  std::span<double> span() { return {data_.data(), data_.size()}; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 2-D accessors; caller guarantees rank()==2
  double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  int64_t rows() const { return shape_[0]; }
  int64_t cols() const { return shape_[1]; }

  double item() const { return data_.at(0); }

  bool same_shape(const Array& o) const { return shape_ == o.shape_; }
  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const;

 private:
  static size_t count(const std::vector<int64_t>& s) {
    size_t n = 1;
    for (int64_t d : s) n *= static_cast<size_t>(d);
    return n;
  }
  void check_sizes() const;

  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

std::string shape_to_string(const std::vector<int64_t>& s);

}  // namespace covbench::ad
