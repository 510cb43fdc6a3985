#include "ecanet/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "ecanet/errors.hpp"

namespace ecanet {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("Var: not attached to a tape");
  return tape_->value(*this);
}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Reshape: return "reshape";
    case OpKind::SoftmaxRows: return "softmax_rows";
    case OpKind::AdaptiveAvgPool: return "adaptive_avg_pool";
    case OpKind::Project1x1: return "project_1x1";
    case OpKind::SliceH: return "slice_h";
    case OpKind::ConcatH: return "concat_h";
    case OpKind::ConcatC: return "concat_c";
    case OpKind::Add: return "add";
    case OpKind::Scale: return "scale";
    case OpKind::Mul: return "mul";
    case OpKind::Sum: return "sum";
    case OpKind::WeightedSum: return "weighted_sum";
    case OpKind::Pick: return "pick";
  }
  return "?";
}

const Tensor& Gradients::of(const Var& leaf) const {
  const auto& g = by_node_.at(leaf.id());
  if (!g) throw ContractError("Gradients: no gradient recorded for node " + std::to_string(leaf.id()));
  return *g;
}

Var Tape::push(TapeNode node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) throw ContractError("Var belongs to a different tape");
}

Var Tape::leaf(Tensor value, std::string name) {
  TapeNode n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  n.name = std::move(name);
  return push(std::move(n));
}

Var Tape::matmul(const Var& a, const Var& b) {
  check_owned(a);
  check_owned(b);
  TapeNode n;
  n.kind = OpKind::MatMul;
  n.inputs = {a.id(), b.id()};
  n.value = ecanet::matmul(a.value(), b.value());
  return push(std::move(n));
}

Var Tape::transpose(const Var& a) {
  check_owned(a);
  TapeNode n;
  n.kind = OpKind::Transpose;
  n.inputs = {a.id()};
  n.value = ecanet::transpose(a.value());
  return push(std::move(n));
}

Var Tape::reshape(const Var& a, Shape shape) {
  check_owned(a);
  TapeNode n;
  n.kind = OpKind::Reshape;
  n.inputs = {a.id()};
  n.value = a.value().reshaped(std::move(shape));
  return push(std::move(n));
}

Var Tape::softmax_rows(const Var& a) {
  check_owned(a);
  TapeNode n;
  n.kind = OpKind::SoftmaxRows;
  n.inputs = {a.id()};
  n.value = ecanet::softmax_rows(a.value());
  return push(std::move(n));
}

Var Tape::adaptive_avg_pool(const Var& f, std::size_t out_h, std::size_t out_w) {
  check_owned(f);
  TapeNode n;
  n.kind = OpKind::AdaptiveAvgPool;
  n.inputs = {f.id()};
  n.attrs = {out_h, out_w};
  n.value = ecanet::adaptive_avg_pool(FeatureMap(f.value()), out_h, out_w).tensor();
  return push(std::move(n));
}

Var Tape::project_1x1(const Var& f, const Var& weights) {
  check_owned(f);
  check_owned(weights);
  TapeNode n;
  n.kind = OpKind::Project1x1;
  n.inputs = {f.id(), weights.id()};
  n.value = ecanet::project_1x1(FeatureMap(f.value()), weights.value()).tensor();
  return push(std::move(n));
}

std::vector<Var> Tape::split_h(const Var& f, std::size_t count) {
  check_owned(f);
  auto parts = ecanet::split_h(FeatureMap(f.value()), count);
  std::vector<Var> out;
  out.reserve(parts.size());
  for (std::size_t s = 0; s < parts.size(); ++s) {
    TapeNode n;
    n.kind = OpKind::SliceH;
    n.inputs = {f.id()};
    n.attrs = {s, count};
    n.value = std::move(parts[s].tensor());
    out.push_back(push(std::move(n)));
  }
  return out;
}

Var Tape::concat_h(std::span<const Var> parts) {
  std::vector<FeatureMap> maps;
  TapeNode n;
  n.kind = OpKind::ConcatH;
  for (const auto& p : parts) {
    check_owned(p);
    maps.emplace_back(p.value());
    n.inputs.push_back(p.id());
  }
  n.value = ecanet::concat_h(maps).tensor();
  return push(std::move(n));
}

Var Tape::concat_c(std::span<const Var> parts) {
  std::vector<FeatureMap> maps;
  TapeNode n;
  n.kind = OpKind::ConcatC;
  for (const auto& p : parts) {
    check_owned(p);
    maps.emplace_back(p.value());
    n.inputs.push_back(p.id());
  }
  n.value = ecanet::concat_c(maps).tensor();
  return push(std::move(n));
}

Var Tape::add(const Var& a, const Var& b) {
  check_owned(a);
  check_owned(b);
  TapeNode n;
  n.kind = OpKind::Add;
  n.inputs = {a.id(), b.id()};
  n.value = ecanet::add(a.value(), b.value());
  return push(std::move(n));
}

Var Tape::scale(const Var& a, double factor) {
  check_owned(a);
  TapeNode n;
  n.kind = OpKind::Scale;
  n.inputs = {a.id()};
  n.scalar = factor;
  n.value = ecanet::scale(a.value(), factor);
  return push(std::move(n));
}

Var Tape::mul(const Var& a, const Var& b) {
  check_owned(a);
  check_owned(b);
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes differ " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  TapeNode n;
  n.kind = OpKind::Mul;
  n.inputs = {a.id(), b.id()};
  n.value = a.value();
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= b.value()[i];
  return push(std::move(n));
}

Var Tape::sum(const Var& a) {
  check_owned(a);
  TapeNode n;
  n.kind = OpKind::Sum;
  n.inputs = {a.id()};
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  n.value = Tensor({1}, total);
  return push(std::move(n));
}

Var Tape::weighted_sum(const Var& a, const Tensor& weights) {
  check_owned(a);
  if (weights.shape() != a.shape()) {
    throw DimensionError("weighted_sum: weights " + to_string(weights.shape()) + " vs value " +
                         to_string(a.shape()));
  }
  TapeNode n;
  n.kind = OpKind::WeightedSum;
  n.inputs = {a.id()};
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += a.value()[i] * weights[i];
  n.value = Tensor({1}, total);
  n.saved = {weights};
  return push(std::move(n));
}

Var Tape::pick(const Var& a, std::size_t flat_index) {
  check_owned(a);
  if (flat_index >= a.value().size()) throw ContractError("pick: index out of range");
  TapeNode n;
  n.kind = OpKind::Pick;
  n.inputs = {a.id()};
  n.attrs = {flat_index, 0};
  n.value = Tensor({1}, a.value()[flat_index]);
  return push(std::move(n));
}

namespace {

void accumulate(std::optional<Tensor>& slot, const Tensor& contribution) {
  if (!slot) {
    slot = contribution;
    return;
  }
  for (std::size_t i = 0; i < slot->size(); ++i) (*slot)[i] += contribution[i];
}

}  // namespace

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this || loss.id() >= nodes_.size()) throw ContractError("backward: foreign loss");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
  }
  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id()] = Tensor(loss.shape(), 1.0);

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (!grads[id]) continue;
    const TapeNode& node = nodes_[id];
    const Tensor& g = *grads[id];
    auto in = [&](std::size_t k) -> const Tensor& { return nodes_[node.inputs[k]].value; };
    auto slot = [&](std::size_t k) -> std::optional<Tensor>& { return grads[node.inputs[k]]; };

    switch (node.kind) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul:
        accumulate(slot(0), detail::gemm(g, false, in(1), true));
        accumulate(slot(1), detail::gemm(in(0), true, g, false));
        break;
      case OpKind::Transpose:
        accumulate(slot(0), ecanet::transpose(g));
        break;
      case OpKind::Reshape:
        accumulate(slot(0), g.reshaped(in(0).shape()));
        break;
      case OpKind::SoftmaxRows: {
        const Tensor& y = node.value;
        const std::size_t m = y.extent(0), cols = y.extent(1);
        Tensor dx({m, cols});
        for (std::size_t i = 0; i < m; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += g.at(i, j) * y.at(i, j);
          for (std::size_t j = 0; j < cols; ++j) dx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        accumulate(slot(0), dx);
        break;
      }
      case OpKind::AdaptiveAvgPool: {
        // Each input cell receives 1/area from every bin that covers it.
        const Tensor& x = in(0);
        const std::size_t C = x.extent(0), H = x.extent(1), W = x.extent(2);
        const std::size_t out_h = node.attrs[0], out_w = node.attrs[1];
        Tensor dx(x.shape());
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < out_h; ++i) {
            const PoolBin rows = pool_bin(i, H, out_h);
            for (std::size_t j = 0; j < out_w; ++j) {
              const PoolBin cols = pool_bin(j, W, out_w);
              const double share =
                  g.at(c, i, j) / static_cast<double>((rows.end - rows.begin) * (cols.end - cols.begin));
              for (std::size_t h = rows.begin; h < rows.end; ++h)
                for (std::size_t w = cols.begin; w < cols.end; ++w) dx.at(c, h, w) += share;
            }
          }
        accumulate(slot(0), dx);
        break;
      }
      case OpKind::Project1x1: {
        const Tensor& x = in(0);
        const Tensor& w = in(1);
        const std::size_t hw = x.extent(1) * x.extent(2);
        const Tensor gm = g.reshaped({w.extent(0), hw});
        const Tensor xm = x.reshaped({x.extent(0), hw});
        accumulate(slot(0), detail::gemm(w, true, gm, false).reshaped(x.shape()));
        accumulate(slot(1), detail::gemm(gm, false, xm, true));
        break;
      }
      case OpKind::SliceH: {
        const Tensor& x = in(0);
        const std::size_t band = g.extent(1), offset = node.attrs[0] * band;
        Tensor dx(x.shape());
        for (std::size_t c = 0; c < g.extent(0); ++c)
          for (std::size_t h = 0; h < band; ++h)
            for (std::size_t w = 0; w < g.extent(2); ++w) dx.at(c, offset + h, w) = g.at(c, h, w);
        accumulate(slot(0), dx);
        break;
      }
      case OpKind::ConcatH: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          Tensor part(in(k).shape());
          for (std::size_t c = 0; c < part.extent(0); ++c)
            for (std::size_t h = 0; h < part.extent(1); ++h)
              for (std::size_t w = 0; w < part.extent(2); ++w) part.at(c, h, w) = g.at(c, offset + h, w);
          offset += part.extent(1);
          accumulate(slot(k), part);
        }
        break;
      }
      case OpKind::ConcatC: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          const std::size_t count = in(k).size();
          std::vector<double> chunk(g.data().begin() + offset, g.data().begin() + offset + count);
          offset += count;
          accumulate(slot(k), Tensor(in(k).shape(), std::move(chunk)));
        }
        break;
      }
      case OpKind::Add:
        accumulate(slot(0), g);
        accumulate(slot(1), g);
        break;
      case OpKind::Scale:
        accumulate(slot(0), ecanet::scale(g, node.scalar));
        break;
      case OpKind::Mul: {
        Tensor da = g, db = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
          da[i] *= in(1)[i];
          db[i] *= in(0)[i];
        }
        accumulate(slot(0), da);
        accumulate(slot(1), db);
        break;
      }
      case OpKind::Sum:
        accumulate(slot(0), Tensor(in(0).shape(), g[0]));
        break;
      case OpKind::WeightedSum:
        accumulate(slot(0), ecanet::scale(node.saved[0], g[0]));
        break;
      case OpKind::Pick: {
        Tensor dx(in(0).shape());
        dx[node.attrs[0]] = g[0];
        accumulate(slot(0), dx);
        break;
      }
    }
  }

  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind == OpKind::Leaf && !grads[id]) grads[id] = Tensor(nodes_[id].value.shape());
  }
  return Gradients(std::move(grads));
}

namespace {

double evaluate(const ScalarFunction& f, std::span<const NamedTensor> point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& p : point) leaves.push_back(tape.leaf(p.value, p.name));
  const Var loss = f(tape, leaves);
  if (loss.value().size() != 1) throw ContractError("grad_check: function is not scalar-valued");
  return loss.value()[0];
}

}  // namespace

std::vector<GradCheckReport> grad_check(const ScalarFunction& f, std::span<const NamedTensor> point,
                                        double h, double tol) {
  if (!(h > 0.0)) throw ContractError("grad_check: step h must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : point) leaves.push_back(tape.leaf(p.value, p.name));
    const Var loss = f(tape, leaves);
    const Gradients grads = tape.backward(loss);
    for (const auto& leaf : leaves) analytic.push_back(grads.of(leaf));
  }

  std::vector<NamedTensor> probe(point.begin(), point.end());
  std::vector<GradCheckReport> reports;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    GradCheckReport report;
    report.parameter = probe[k].name;
    report.step = h;
    report.tolerance = tol;
    for (std::size_t i = 0; i < probe[k].value.size(); ++i) {
      const double original = probe[k].value[i];
      probe[k].value[i] = original + h;
      const double up = evaluate(f, probe);
      probe[k].value[i] = original - h;
      const double down = evaluate(f, probe);
      probe[k].value[i] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite evaluation perturbing " + probe[k].name + "[" +
                           std::to_string(i) + "]");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic[k][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double rel = std::abs(exact - numeric) / denom;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_index = i;
      }
    }
    report.passed = report.max_relative_error < tol;
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace ecanet
