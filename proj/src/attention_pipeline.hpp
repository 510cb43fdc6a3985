#pragma once

// Backend-generic attention dataflow. Each backend supplies a Value type
// and the primitive ops; the eager, tape and counting paths all run this
// exact sequence, so their ledger events and shapes cannot drift apart.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ecanet/attention.hpp"
#include "ecanet/errors.hpp"
#include "ecanet/ledger.hpp"

namespace ecanet::pipeline {

template <class Value>
struct BranchWeights {
  Value wq;
  Value wk;
  Value wv;
};

class AffinityGuard {
 public:
  explicit AffinityGuard(std::uint64_t entries) : entries_(entries) { acquire_affinity(entries_); }
  ~AffinityGuard() { release_affinity(entries_); }
  AffinityGuard(const AffinityGuard&) = delete;
  AffinityGuard& operator=(const AffinityGuard&) = delete;

 private:
  std::uint64_t entries_;
};

template <class B, class Value>
void check_weights(B& b, const Value& f, const BranchWeights<Value>& w, std::size_t configured_channels) {
  const Shape in = b.shape(f);
  const Shape q = b.shape(w.wq), k = b.shape(w.wk), v = b.shape(w.wv);
  const std::size_t ce = in[0];
  const bool ok = q.size() == 2 && k.size() == 2 && v.size() == 2 && q == k && q[1] == ce &&
                  v[0] == ce && v[1] == ce;
  if (!ok) {
    throw DimensionError("attention weights Wq" + to_string(q) + " Wk" + to_string(k) + " Wv" + to_string(v) +
                         " do not fit input " + to_string(in));
  }
  if (configured_channels != 0 && q[0] != configured_channels) {
    throw DimensionError("attention weights carry " + std::to_string(q[0]) +
                         " query/key channels, config expects " + std::to_string(configured_channels));
  }
}

// Affinity A = Q^T K, softmax over regions, then S = V A^T, for one query map
// against a (possibly pooled) key/value grid.
template <class B, class Value>
Value attend(B& b, const Value& q, const Value& k_pooled, const Value& v_pooled, const AttentionOptions& opt) {
  const Shape qs = b.shape(q), ks = b.shape(k_pooled), vs = b.shape(v_pooled);
  const std::size_t c = qs[0], hw = qs[1] * qs[2], regions = ks[1] * ks[2], ce = vs[0];
  const std::uint64_t entries = static_cast<std::uint64_t>(hw) * regions;
  b.reserve_affinity(entries);
  AffinityGuard live(entries);

  Value queries = b.transpose(b.reshape(q, {c, hw}));                // (HW x C)
  Value affinity = b.matmul(queries, b.reshape(k_pooled, {c, regions}));  // (HW x P)
  if (opt.scale_affinity) affinity = b.scale(affinity, 1.0 / std::sqrt(static_cast<double>(c)));
  affinity = b.softmax_rows(affinity);
  Value out = b.matmul(b.reshape(v_pooled, {ce, regions}), b.transpose(affinity));  // (Ce x HW)
  return b.reshape(out, {ce, qs[1], qs[2]});
}

// Project then pool, matching the module dataflow.
template <class B, class Value>
Value pooled_branch(B& b, const Value& f, const BranchWeights<Value>& w, std::size_t out_h, std::size_t out_w,
                    const AttentionOptions& opt) {
  Value q = b.project(f, w.wq);
  Value k = b.pool(b.project(f, w.wk), out_h, out_w);
  Value v = b.pool(b.project(f, w.wv), out_h, out_w);
  return attend(b, q, k, v, opt);
}

template <class B, class Value>
Value hsa(B& b, const Value& f, const HsaConfig& cfg, const BranchWeights<Value>& w) {
  const Shape in = b.shape(f);
  if (in.size() != 3) throw DimensionError("hsa_forward: expected (C,H,W) input, got " + to_string(in));
  validate(cfg, in[1], in[2]);
  check_weights(b, f, w, cfg.reduced_channels);

  std::vector<Value> segments = b.split_h(f, cfg.segments);
  std::vector<Value> attended;
  attended.reserve(segments.size());
  for (const auto& s : segments) attended.push_back(pooled_branch(b, s, w, cfg.pooled_h, cfg.pooled_w, cfg.options));
  Value out = b.concat_h(attended);
  if (cfg.options.residual) out = b.add(out, f);
  return out;
}

template <class B, class Value>
std::vector<Value> psa(B& b, const Value& f, const PsaConfig& cfg, const std::vector<BranchWeights<Value>>& w) {
  const Shape in = b.shape(f);
  if (in.size() != 3) throw DimensionError("psa_forward: expected (C,H,W) input, got " + to_string(in));
  validate(cfg, in[1], in[2]);
  if (w.size() != cfg.scales.size()) {
    throw DimensionError("psa_forward: " + std::to_string(w.size()) + " weight sets for " +
                         std::to_string(cfg.scales.size()) + " scales");
  }
  std::vector<Value> outs;
  outs.reserve(cfg.scales.size());
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    check_weights(b, f, w[i], cfg.reduced_channels);
    Value out = pooled_branch(b, f, w[i], cfg.scales[i].first, cfg.scales[i].second, cfg.options);
    if (cfg.options.residual) out = b.add(out, f);
    outs.push_back(std::move(out));
  }
  return outs;
}

template <class B, class Value>
Value nonlocal(B& b, const Value& f, const BranchWeights<Value>& w, const AttentionOptions& opt) {
  const Shape in = b.shape(f);
  if (in.size() != 3) throw DimensionError("nonlocal_forward: expected (C,H,W) input, got " + to_string(in));
  check_weights(b, f, w, 0);
  Value out = attend(b, b.project(f, w.wq), b.project(f, w.wk), b.project(f, w.wv), opt);
  if (opt.residual) out = b.add(out, f);
  return out;
}

template <class B, class Value>
Value head(B& b, const Value& f, const HsaConfig& hsa_cfg, const PsaConfig& psa_cfg,
           const BranchWeights<Value>& hsa_w, const std::vector<BranchWeights<Value>>& psa_w) {
  std::vector<Value> blocks{f, hsa(b, f, hsa_cfg, hsa_w)};
  for (auto& p : psa(b, f, psa_cfg, psa_w)) blocks.push_back(std::move(p));
  return b.concat_c(blocks);
}

}  // namespace ecanet::pipeline
