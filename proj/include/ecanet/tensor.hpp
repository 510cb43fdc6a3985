#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ecanet {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major tensor of doubles, rank 1 to 4. Every extent is >= 1.
class Tensor {
 public:
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor identity(std::size_t n);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// A (C,H,W) tensor. Element (c,h,w) lives at offset c*H*W + h*W + w.
class FeatureMap {
 public:
  explicit FeatureMap(Tensor values);
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);

  std::size_t channels() const { return values_.extent(0); }
  std::size_t height() const { return values_.extent(1); }
  std::size_t width() const { return values_.extent(2); }

  double at(std::size_t c, std::size_t h, std::size_t w) const { return values_.at(c, h, w); }
  double& at(std::size_t c, std::size_t h, std::size_t w) { return values_.at(c, h, w); }

  const Tensor& tensor() const { return values_; }
  Tensor& tensor() { return values_; }

  friend bool operator==(const FeatureMap& a, const FeatureMap& b) = default;

 private:
  Tensor values_;
};

/// Half-open source range [begin, end) feeding adaptive pooling bin `index`.
struct PoolBin {
  std::size_t begin;
  std::size_t end;
};
PoolBin pool_bin(std::size_t index, std::size_t in_extent, std::size_t out_extent);

// Matrix product. Adds m*k*n to the active ledger's MAC counter.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

FeatureMap adaptive_avg_pool(const FeatureMap& f, std::size_t out_h, std::size_t out_w);
FeatureMap project_1x1(const FeatureMap& f, const Tensor& weights);
std::vector<FeatureMap> split_h(const FeatureMap& f, std::size_t n);
FeatureMap concat_h(std::span<const FeatureMap> parts);
FeatureMap concat_c(std::span<const FeatureMap> parts);

namespace detail {
// Uncounted product with optional transposed operands; backward passes use it.
Tensor gemm(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b);
}  // namespace detail

}  // namespace ecanet
