#include "ecanet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ecanet/errors.hpp"
#include "ecanet/ledger.hpp"

namespace ecanet {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw DimensionError("tensor rank must be 1..4, got shape " + to_string(shape));
  }
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be >= 1, got shape " + to_string(shape));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(t.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != element_count(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

FeatureMap::FeatureMap(Tensor values) : values_(std::move(values)) {
  if (values_.rank() != 3) {
    throw DimensionError("feature map needs a (C,H,W) tensor, got " + to_string(values_.shape()));
  }
}

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill)
    : values_({channels, height, width}, fill) {}

PoolBin pool_bin(std::size_t index, std::size_t in_extent, std::size_t out_extent) {
  return {index * in_extent / out_extent, ((index + 1) * in_extent + out_extent - 1) / out_extent};
}

namespace detail {

Tensor gemm(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = transpose_a ? a.extent(1) : a.extent(0);
  const std::size_t k = transpose_a ? a.extent(0) : a.extent(1);
  const std::size_t kb = transpose_b ? b.extent(1) : b.extent(0);
  const std::size_t n = transpose_b ? b.extent(0) : b.extent(1);
  if (k != kb) {
    throw DimensionError("matmul: inner extents disagree for shapes " + to_string(a.shape()) +
                         (transpose_a ? "^T" : "") + " and " + to_string(b.shape()) +
                         (transpose_b ? "^T" : ""));
  }
  Tensor out({m, n});
  const auto A = a.data();
  const auto B = b.data();
  auto C = out.data();
  const std::size_t lda = a.extent(1);
  const std::size_t ldb = b.extent(1);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = transpose_a ? A[p * lda + i] : A[i * lda + p];
      if (av == 0.0) continue;
      if (!transpose_b) {
        const double* brow = B.data() + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * B[j * ldb + p];
      }
    }
  }
  return out;
}

}  // namespace detail

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor out = detail::gemm(a, false, b, false);
  record_macs(static_cast<std::uint64_t>(a.extent(0)) * a.extent(1) * b.extent(1));
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a.data().data() + i * n;
    double* dst = out.data().data() + i * n;
    double peak = row[0];
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(row[j])) {
        throw NumericError("softmax_rows: non-finite input at row " + std::to_string(i) +
                           ", column " + std::to_string(j));
      }
      peak = std::max(peak, row[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - peak);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes differ " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

FeatureMap adaptive_avg_pool(const FeatureMap& f, std::size_t out_h, std::size_t out_w) {
  const std::size_t C = f.channels(), H = f.height(), W = f.width();
  if (out_h < 1 || out_w < 1 || out_h > H || out_w > W) {
    throw DimensionError("adaptive_avg_pool: output (" + std::to_string(out_h) + "," +
                         std::to_string(out_w) + ") must lie within input (" + std::to_string(H) +
                         "," + std::to_string(W) + ")");
  }
  FeatureMap out(C, out_h, out_w);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const PoolBin rows = pool_bin(i, H, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const PoolBin cols = pool_bin(j, W, out_w);
        double sum = 0.0;
        for (std::size_t h = rows.begin; h < rows.end; ++h)
          for (std::size_t w = cols.begin; w < cols.end; ++w) sum += f.at(c, h, w);
        out.at(c, i, j) = sum / static_cast<double>((rows.end - rows.begin) * (cols.end - cols.begin));
      }
    }
  }
  return out;
}

FeatureMap project_1x1(const FeatureMap& f, const Tensor& weights) {
  if (weights.rank() != 2 || weights.extent(1) != f.channels()) {
    throw DimensionError("project_1x1: weights " + to_string(weights.shape()) +
                         " do not accept input " + to_string(f.tensor().shape()));
  }
  const std::size_t hw = f.height() * f.width();
  Tensor flat = detail::gemm(weights, false, f.tensor().reshaped({f.channels(), hw}), false);
  return FeatureMap(flat.reshaped({weights.extent(0), f.height(), f.width()}));
}

std::vector<FeatureMap> split_h(const FeatureMap& f, std::size_t n) {
  const std::size_t C = f.channels(), H = f.height(), W = f.width();
  if (n == 0 || H % n != 0) {
    throw GeometryError("split_h: height " + std::to_string(H) + " is not divisible into " +
                        std::to_string(n) + " segments");
  }
  const std::size_t band = H / n;
  std::vector<FeatureMap> parts;
  parts.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    FeatureMap part(C, band, W);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < band; ++h)
        for (std::size_t w = 0; w < W; ++w) part.at(c, h, w) = f.at(c, s * band + h, w);
    parts.push_back(std::move(part));
  }
  return parts;
}

FeatureMap concat_h(std::span<const FeatureMap> parts) {
  if (parts.empty()) throw ContractError("concat_h: no parts");
  const std::size_t C = parts[0].channels(), W = parts[0].width();
  std::size_t H = 0;
  for (const auto& p : parts) {
    if (p.channels() != C || p.width() != W) {
      throw DimensionError("concat_h: part " + to_string(p.tensor().shape()) +
                           " disagrees with " + to_string(parts[0].tensor().shape()));
    }
    H += p.height();
  }
  FeatureMap out(C, H, W);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < p.height(); ++h)
        for (std::size_t w = 0; w < W; ++w) out.at(c, offset + h, w) = p.at(c, h, w);
    offset += p.height();
  }
  return out;
}

FeatureMap concat_c(std::span<const FeatureMap> parts) {
  if (parts.empty()) throw ContractError("concat_c: no parts");
  const std::size_t H = parts[0].height(), W = parts[0].width();
  std::size_t C = 0;
  for (const auto& p : parts) {
    if (p.height() != H || p.width() != W) {
      throw DimensionError("concat_c: part " + to_string(p.tensor().shape()) +
                           " disagrees with " + to_string(parts[0].tensor().shape()));
    }
    C += p.channels();
  }
  std::vector<double> data;
  data.reserve(C * H * W);
  for (const auto& p : parts) data.insert(data.end(), p.tensor().data().begin(), p.tensor().data().end());
  return FeatureMap(Tensor({C, H, W}, std::move(data)));
}

}  // namespace ecanet
