#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecanet/tensor.hpp"

namespace ecanet {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while
/// the owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind {
  Leaf,
  MatMul,
  Transpose,
  Reshape,
  SoftmaxRows,
  AdaptiveAvgPool,
  Project1x1,
  SliceH,
  ConcatH,
  ConcatC,
  Add,
  Scale,
  Mul,
  Sum,
  WeightedSum,
  Pick,
};

const char* to_string(OpKind kind);

struct TapeNode {
  OpKind kind = OpKind::Leaf;
  std::vector<std::size_t> inputs;
  Tensor value{Shape{1}};
  // Forward values the backward rule needs beyond the inputs' own values.
  std::vector<Tensor> saved;
  // Integer attributes: pooled extents, slice index/count, pick offset.
  std::array<std::size_t, 2> attrs{};
  double scalar = 0.0;
  std::string name;
};

class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Tensor>> by_node) : by_node_(std::move(by_node)) {}

  /// Gradient of the loss w.r.t. a leaf; zeros when the leaf did not
  /// influence the loss.
  const Tensor& of(const Var& leaf) const;

 private:
  std::vector<std::optional<Tensor>> by_node_;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, which is a
/// topological order, so backward is a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, std::string name = {});

  Var matmul(const Var& a, const Var& b);
  Var transpose(const Var& a);
  Var reshape(const Var& a, Shape shape);
  Var softmax_rows(const Var& a);
  Var adaptive_avg_pool(const Var& f, std::size_t out_h, std::size_t out_w);
  Var project_1x1(const Var& f, const Var& weights);
  std::vector<Var> split_h(const Var& f, std::size_t n);
  Var concat_h(std::span<const Var> parts);
  Var concat_c(std::span<const Var> parts);
  Var add(const Var& a, const Var& b);
  Var scale(const Var& a, double factor);
  Var mul(const Var& a, const Var& b);
  Var sum(const Var& a);
  /// sum(a .* weights) with constant weights of a's shape.
  Var weighted_sum(const Var& a, const Tensor& weights);
  Var pick(const Var& a, std::size_t flat_index);

  Gradients backward(const Var& loss) const;

  const Tensor& value(const Var& v) const { return nodes_.at(v.id()).value; }
  const TapeNode& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

 private:
  Var push(TapeNode node);
  void check_owned(const Var& v) const;

  std::vector<TapeNode> nodes_;
};

struct GradCheckReport {
  std::string parameter;
  double max_relative_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Builds a scalar loss on `tape` from one leaf per entry of the point.
using ScalarFunction = std::function<Var(Tape& tape, std::span<const Var> leaves)>;

/// Compares backward gradients against central differences
/// (f(x+h) - f(x-h)) / 2h at every coordinate of every leaf. The relative
/// error denominator is max(|analytic|, |numeric|, 1e-8).
std::vector<GradCheckReport> grad_check(const ScalarFunction& f, std::span<const NamedTensor> point,
                                        double h = 1e-5, double tol = 1e-4);

}  // namespace ecanet
