#include "ecanet/attention.hpp"

#include <algorithm>
#include <cmath>

#include "attention_pipeline.hpp"
#include "ecanet/errors.hpp"

namespace ecanet {

std::size_t default_reduced_channels(std::size_t input_channels) {
  return std::max<std::size_t>(input_channels / 8, 1);
}

std::size_t resolve_reduced_channels(std::size_t configured, std::size_t input_channels) {
  return configured != 0 ? configured : default_reduced_channels(input_channels);
}

void validate(const HsaConfig& cfg, std::size_t He, std::size_t We) {
  if (cfg.segments == 0 || He % cfg.segments != 0) {
    throw GeometryError("hsa: height " + std::to_string(He) + " is not divisible into " +
                        std::to_string(cfg.segments) + " segments");
  }
  const std::size_t band = He / cfg.segments;
  if (cfg.pooled_h == 0 || cfg.pooled_w == 0 || cfg.pooled_h > band || cfg.pooled_w > We) {
    throw GeometryError("hsa: pooled grid (" + std::to_string(cfg.pooled_h) + "," + std::to_string(cfg.pooled_w) +
                        ") must fit each segment (" + std::to_string(band) + "," + std::to_string(We) + ")");
  }
}

void validate(const PsaConfig& cfg, std::size_t He, std::size_t We) {
  if (cfg.scales.empty()) throw ContractError("psa: at least one pyramid scale is required");
  for (const auto& [h, w] : cfg.scales) {
    if (h == 0 || w == 0 || h > He || w > We) {
      throw GeometryError("psa: scale (" + std::to_string(h) + "," + std::to_string(w) + ") must fit feature (" +
                          std::to_string(He) + "," + std::to_string(We) + ")");
    }
  }
}

AttentionWeights AttentionWeights::random(std::size_t input_channels, std::size_t reduced_channels,
                                          SplitMix64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_channels));
  Tensor wq = random_tensor({reduced_channels, input_channels}, rng, -bound, bound);
  Tensor wk = random_tensor({reduced_channels, input_channels}, rng, -bound, bound);
  Tensor wv = random_tensor({input_channels, input_channels}, rng, -bound, bound);
  return {std::move(wq), std::move(wk), std::move(wv)};
}

EcaWeights EcaWeights::random(std::size_t input_channels, const HsaConfig& hsa, const PsaConfig& psa,
                              SplitMix64& rng) {
  EcaWeights w{AttentionWeights::random(input_channels, resolve_reduced_channels(hsa.reduced_channels, input_channels),
                                        rng),
               {}};
  const std::size_t c = resolve_reduced_channels(psa.reduced_channels, input_channels);
  for (std::size_t i = 0; i < psa.scales.size(); ++i) w.psa.push_back(AttentionWeights::random(input_channels, c, rng));
  return w;
}

namespace {

class EagerBackend {
 public:
  explicit EagerBackend(std::uint64_t budget) : budget_(budget) {}

  Shape shape(const Tensor& v) const { return v.shape(); }
  Tensor project(const Tensor& f, const Tensor& w) { return project_1x1(FeatureMap(f), w).tensor(); }
  Tensor pool(const Tensor& f, std::size_t h, std::size_t w) { return adaptive_avg_pool(FeatureMap(f), h, w).tensor(); }
  std::vector<Tensor> split_h(const Tensor& f, std::size_t n) {
    std::vector<Tensor> out;
    for (auto& p : ecanet::split_h(FeatureMap(f), n)) out.push_back(std::move(p.tensor()));
    return out;
  }
  Tensor concat_h(const std::vector<Tensor>& parts) { return ecanet::concat_h(as_maps(parts)).tensor(); }
  Tensor concat_c(const std::vector<Tensor>& parts) { return ecanet::concat_c(as_maps(parts)).tensor(); }
  Tensor reshape(const Tensor& v, Shape s) { return v.reshaped(std::move(s)); }
  Tensor transpose(const Tensor& v) { return ecanet::transpose(v); }
  Tensor matmul(const Tensor& a, const Tensor& b) { return ecanet::matmul(a, b); }
  Tensor softmax_rows(const Tensor& v) { return ecanet::softmax_rows(v); }
  Tensor scale(const Tensor& v, double s) { return ecanet::scale(v, s); }
  Tensor add(const Tensor& a, const Tensor& b) { return ecanet::add(a, b); }

  void reserve_affinity(std::uint64_t entries) const {
    if (entries > budget_) {
      throw MemoryBudgetError("affinity map of " + std::to_string(entries) + " entries exceeds budget of " +
                              std::to_string(budget_) + "; use a counting run or raise max_affinity_entries");
    }
  }

 private:
  static std::vector<FeatureMap> as_maps(const std::vector<Tensor>& parts) {
    std::vector<FeatureMap> maps;
    maps.reserve(parts.size());
    for (const auto& p : parts) maps.emplace_back(p);
    return maps;
  }

  std::uint64_t budget_;
};

class TapeBackend {
 public:
  explicit TapeBackend(Tape& tape) : tape_(tape) {}

  Shape shape(const Var& v) const { return v.shape(); }
  Var project(const Var& f, const Var& w) { return tape_.project_1x1(f, w); }
  Var pool(const Var& f, std::size_t h, std::size_t w) { return tape_.adaptive_avg_pool(f, h, w); }
  std::vector<Var> split_h(const Var& f, std::size_t n) { return tape_.split_h(f, n); }
  Var concat_h(const std::vector<Var>& parts) { return tape_.concat_h(parts); }
  Var concat_c(const std::vector<Var>& parts) { return tape_.concat_c(parts); }
  Var reshape(const Var& v, Shape s) { return tape_.reshape(v, std::move(s)); }
  Var transpose(const Var& v) { return tape_.transpose(v); }
  Var matmul(const Var& a, const Var& b) { return tape_.matmul(a, b); }
  Var softmax_rows(const Var& v) { return tape_.softmax_rows(v); }
  Var scale(const Var& v, double s) { return tape_.scale(v, s); }
  Var add(const Var& a, const Var& b) { return tape_.add(a, b); }
  void reserve_affinity(std::uint64_t) const {}

 private:
  Tape& tape_;
};

// Shape-only execution: performs every extent check the eager path does and
// emits the same ledger events, without touching any data.
class CountingBackend {
 public:
  Shape shape(const Shape& v) const { return v; }

  Shape project(const Shape& f, const Shape& w) {
    if (w.size() != 2 || f.size() != 3 || w[1] != f[0]) {
      throw DimensionError("project_1x1: weights " + to_string(w) + " do not accept input " + to_string(f));
    }
    return {w[0], f[1], f[2]};
  }
  Shape pool(const Shape& f, std::size_t h, std::size_t w) {
    if (h < 1 || w < 1 || h > f[1] || w > f[2]) {
      throw DimensionError("adaptive_avg_pool: output (" + std::to_string(h) + "," + std::to_string(w) +
                           ") must lie within input " + to_string(f));
    }
    return {f[0], h, w};
  }
  std::vector<Shape> split_h(const Shape& f, std::size_t n) {
    if (n == 0 || f[1] % n != 0) {
      throw GeometryError("split_h: height " + std::to_string(f[1]) + " is not divisible into " + std::to_string(n) +
                          " segments");
    }
    return std::vector<Shape>(n, Shape{f[0], f[1] / n, f[2]});
  }
  Shape concat_h(const std::vector<Shape>& parts) {
    Shape out = parts.at(0);
    out[1] = 0;
    for (const auto& p : parts) {
      if (p[0] != out[0] || p[2] != out[2]) throw DimensionError("concat_h: part " + to_string(p) + " disagrees");
      out[1] += p[1];
    }
    return out;
  }
  Shape concat_c(const std::vector<Shape>& parts) {
    Shape out = parts.at(0);
    out[0] = 0;
    for (const auto& p : parts) {
      if (p[1] != out[1] || p[2] != out[2]) throw DimensionError("concat_c: part " + to_string(p) + " disagrees");
      out[0] += p[0];
    }
    return out;
  }
  Shape reshape(const Shape& v, Shape s) {
    if (element_count(v) != element_count(s)) {
      throw DimensionError("cannot reshape " + to_string(v) + " to " + to_string(s));
    }
    return s;
  }
  Shape transpose(const Shape& v) { return {v[1], v[0]}; }
  Shape matmul(const Shape& a, const Shape& b) {
    if (a[1] != b[0]) throw DimensionError("matmul: inner extents disagree for " + to_string(a) + " and " + to_string(b));
    record_macs(static_cast<std::uint64_t>(a[0]) * a[1] * b[1]);
    return {a[0], b[1]};
  }
  Shape softmax_rows(const Shape& v) { return v; }
  Shape scale(const Shape& v, double) { return v; }
  Shape add(const Shape& a, const Shape& b) {
    if (a != b) throw DimensionError("add: shapes differ " + to_string(a) + " vs " + to_string(b));
    return a;
  }
  void reserve_affinity(std::uint64_t) const {}
};

pipeline::BranchWeights<Tensor> branch(const AttentionWeights& w) { return {w.wq, w.wk, w.wv}; }
pipeline::BranchWeights<Var> branch(const AttentionVars& w) { return {w.wq, w.wk, w.wv}; }

pipeline::BranchWeights<Shape> branch_shapes(std::size_t ce, std::size_t c) {
  return {Shape{c, ce}, Shape{c, ce}, Shape{ce, ce}};
}

std::vector<FeatureMap> as_maps(std::vector<Tensor> tensors) {
  std::vector<FeatureMap> maps;
  maps.reserve(tensors.size());
  for (auto& t : tensors) maps.emplace_back(std::move(t));
  return maps;
}

void require_chw(const Shape& s, const char* op) {
  if (s.size() != 3) throw DimensionError(std::string(op) + ": expected (C,H,W) input, got " + to_string(s));
}

}  // namespace

FeatureMap hsa_forward(const FeatureMap& f, const HsaConfig& cfg, const AttentionWeights& w) {
  EagerBackend b(cfg.options.max_affinity_entries);
  return FeatureMap(pipeline::hsa(b, f.tensor(), cfg, branch(w)));
}

std::vector<FeatureMap> psa_forward(const FeatureMap& f, const PsaConfig& cfg, std::span<const AttentionWeights> w) {
  EagerBackend b(cfg.options.max_affinity_entries);
  std::vector<pipeline::BranchWeights<Tensor>> ws;
  for (const auto& x : w) ws.push_back(branch(x));
  return as_maps(pipeline::psa(b, f.tensor(), cfg, ws));
}

FeatureMap nonlocal_forward(const FeatureMap& f, const AttentionWeights& w, const AttentionOptions& options) {
  EagerBackend b(options.max_affinity_entries);
  return FeatureMap(pipeline::nonlocal(b, f.tensor(), branch(w), options));
}

FeatureMap ecanet_head(const FeatureMap& f, const HsaConfig& hsa, const PsaConfig& psa, const EcaWeights& w) {
  EagerBackend b(std::max(hsa.options.max_affinity_entries, psa.options.max_affinity_entries));
  std::vector<pipeline::BranchWeights<Tensor>> ws;
  for (const auto& x : w.psa) ws.push_back(branch(x));
  return FeatureMap(pipeline::head(b, f.tensor(), hsa, psa, branch(w.hsa), ws));
}

AttentionVars attach(Tape& tape, const AttentionWeights& w, const std::string& prefix) {
  return {tape.leaf(w.wq, prefix + ".wq"), tape.leaf(w.wk, prefix + ".wk"), tape.leaf(w.wv, prefix + ".wv")};
}

Var hsa_forward(Tape& tape, const Var& f, const HsaConfig& cfg, const AttentionVars& w) {
  TapeBackend b(tape);
  return pipeline::hsa(b, f, cfg, branch(w));
}

std::vector<Var> psa_forward(Tape& tape, const Var& f, const PsaConfig& cfg, std::span<const AttentionVars> w) {
  TapeBackend b(tape);
  std::vector<pipeline::BranchWeights<Var>> ws;
  for (const auto& x : w) ws.push_back(branch(x));
  return pipeline::psa(b, f, cfg, ws);
}

Var nonlocal_forward(Tape& tape, const Var& f, const AttentionVars& w, const AttentionOptions& options) {
  TapeBackend b(tape);
  return pipeline::nonlocal(b, f, branch(w), options);
}

Var ecanet_head(Tape& tape, const Var& f, const HsaConfig& hsa, const PsaConfig& psa, const AttentionVars& hsa_w,
                std::span<const AttentionVars> psa_w) {
  TapeBackend b(tape);
  std::vector<pipeline::BranchWeights<Var>> ws;
  for (const auto& x : psa_w) ws.push_back(branch(x));
  return pipeline::head(b, f, hsa, psa, branch(hsa_w), ws);
}

Shape count_hsa(const Shape& input, const HsaConfig& cfg) {
  require_chw(input, "count_hsa");
  CountingBackend b;
  return pipeline::hsa(b, input, cfg, branch_shapes(input[0], resolve_reduced_channels(cfg.reduced_channels, input[0])));
}

std::vector<Shape> count_psa(const Shape& input, const PsaConfig& cfg) {
  require_chw(input, "count_psa");
  CountingBackend b;
  const std::size_t c = resolve_reduced_channels(cfg.reduced_channels, input[0]);
  std::vector<pipeline::BranchWeights<Shape>> ws(cfg.scales.size(), branch_shapes(input[0], c));
  return pipeline::psa(b, input, cfg, ws);
}

Shape count_nonlocal(const Shape& input, std::size_t reduced_channels, const AttentionOptions& options) {
  require_chw(input, "count_nonlocal");
  CountingBackend b;
  return pipeline::nonlocal(b, input, branch_shapes(input[0], resolve_reduced_channels(reduced_channels, input[0])),
                            options);
}

}  // namespace ecanet
