#include "ecanet/grad_suite.hpp"

#include <algorithm>
#include <functional>

#include "ecanet/attention.hpp"
#include "ecanet/errors.hpp"
#include "ecanet/random.hpp"

namespace ecanet {

bool OpCheck::passed() const {
  return std::all_of(reports.begin(), reports.end(), [](const GradCheckReport& r) { return r.passed; });
}

const std::vector<std::string>& grad_suite_ops() {
  static const std::vector<std::string> ops{"matmul", "softmax", "pool", "project", "split",
                                            "concat", "hsa",     "psa",  "ecanet"};
  return ops;
}

namespace {

struct Problem {
  std::vector<NamedTensor> point;
  ScalarFunction loss;
};

// Random projection of an output onto a scalar, so no gradient entry is
// structurally zero.
Var project_out(Tape& tape, const Var& out, SplitMix64& rng) {
  return tape.weighted_sum(out, random_tensor(out.shape(), rng));
}

Problem make_problem(const std::string& op, const GradSuiteOptions& o, SplitMix64 rng) {
  const std::size_t C = o.channels, H = o.height, W = o.width;
  const Tensor f = random_tensor({C, H, W}, rng, -2.0, 2.0);
  // Loss-side randomness gets its own stream, replayed identically on every
  // evaluation of the loss.
  const SplitMix64 loss_rng = rng.split(0x105);

  if (op == "matmul") {
    return {{{"a", f.reshaped({C * H, W})}, {"b", random_tensor({W, C}, rng)}},
            [loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              return project_out(t, t.matmul(x[0], x[1]), r);
            }};
  }
  if (op == "softmax") {
    return {{{"x", f.reshaped({C * H, W})}}, [loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              return project_out(t, t.softmax_rows(x[0]), r);
            }};
  }
  if (op == "pool") {
    // (3,5) bins overlap on an 8x16 map; (2,4) bins tile it.
    return {{{"f", f}}, [loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              return t.add(project_out(t, t.adaptive_avg_pool(x[0], 3, 5), r),
                           project_out(t, t.adaptive_avg_pool(x[0], 2, 4), r));
            }};
  }
  if (op == "project") {
    return {{{"f", f}, {"w", random_tensor({3, C}, rng)}}, [loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              return project_out(t, t.project_1x1(x[0], x[1]), r);
            }};
  }
  if (op == "split") {
    if (H % 4 != 0) throw GeometryError("grad suite: split needs H divisible by 4");
    return {{{"f", f}}, [loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              auto parts = t.split_h(x[0], 4);
              Var total = project_out(t, parts[0], r);
              for (std::size_t i = 1; i < parts.size(); ++i) total = t.add(total, project_out(t, parts[i], r));
              return total;
            }};
  }
  if (op == "concat") {
    if (H % 4 != 0) throw GeometryError("grad suite: concat needs H divisible by 4");
    std::vector<NamedTensor> point;
    for (std::size_t i = 0; i < 4; ++i) point.push_back({"seg" + std::to_string(i), random_tensor({C, H / 4, W}, rng)});
    return {std::move(point), [loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              return project_out(t, t.concat_h(x), r);
            }};
  }
  if (op == "hsa") {
    HsaConfig cfg;
    cfg.segments = 4;
    cfg.pooled_h = std::min<std::size_t>(2, H / 4);
    cfg.pooled_w = std::min<std::size_t>(4, W);
    const AttentionWeights w = AttentionWeights::random(C, default_reduced_channels(C), rng);
    return {{{"f", f}, {"wq", w.wq}, {"wk", w.wk}, {"wv", w.wv}},
            [cfg, loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              return project_out(t, hsa_forward(t, x[0], cfg, AttentionVars{x[1], x[2], x[3]}), r);
            }};
  }
  if (op == "psa") {
    const PsaConfig cfg;
    std::vector<NamedTensor> point{{"f", f}};
    for (std::size_t s = 0; s < cfg.scales.size(); ++s) {
      const AttentionWeights w = AttentionWeights::random(C, default_reduced_channels(C), rng);
      const std::string p = "s" + std::to_string(s) + ".";
      point.push_back({p + "wq", w.wq});
      point.push_back({p + "wk", w.wk});
      point.push_back({p + "wv", w.wv});
    }
    return {std::move(point), [cfg, loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              std::vector<AttentionVars> ws;
              for (std::size_t i = 1; i + 2 < x.size(); i += 3) ws.push_back({x[i], x[i + 1], x[i + 2]});
              auto outs = psa_forward(t, x[0], cfg, ws);
              Var total = project_out(t, outs[0], r);
              for (std::size_t i = 1; i < outs.size(); ++i) total = t.add(total, project_out(t, outs[i], r));
              return total;
            }};
  }
  if (op == "ecanet") {
    const HsaConfig hsa;
    const PsaConfig psa;
    const EcaWeights w = EcaWeights::random(C, hsa, psa, rng);
    std::vector<NamedTensor> point{{"f", f}, {"hsa.wq", w.hsa.wq}, {"hsa.wk", w.hsa.wk}, {"hsa.wv", w.hsa.wv}};
    for (std::size_t s = 0; s < w.psa.size(); ++s) {
      const std::string p = "psa" + std::to_string(s) + ".";
      point.push_back({p + "wq", w.psa[s].wq});
      point.push_back({p + "wk", w.psa[s].wk});
      point.push_back({p + "wv", w.psa[s].wv});
    }
    return {std::move(point), [hsa, psa, loss_rng](Tape& t, std::span<const Var> x) {
              auto r = loss_rng;
              std::vector<AttentionVars> ws;
              for (std::size_t i = 4; i + 2 < x.size(); i += 3) ws.push_back({x[i], x[i + 1], x[i + 2]});
              return project_out(t, ecanet_head(t, x[0], hsa, psa, AttentionVars{x[1], x[2], x[3]}, ws), r);
            }};
  }
  throw ContractError("grad suite: unknown op '" + op + "'");
}

}  // namespace

std::vector<OpCheck> run_grad_suite(const GradSuiteOptions& options) {
  std::vector<std::string> ops = options.ops.empty() ? grad_suite_ops() : options.ops;
  for (const auto& op : ops) {
    if (std::find(grad_suite_ops().begin(), grad_suite_ops().end(), op) == grad_suite_ops().end()) {
      throw ContractError("grad suite: unknown op '" + op + "'");
    }
  }
  const SplitMix64 root(options.base_seed);
  std::vector<OpCheck> checks;
  for (const auto& op : ops) {
    for (std::size_t s = 0; s < options.seeds; ++s) {
      const std::uint64_t seed = options.base_seed + s;
      Problem p = make_problem(op, options, root.split(s));
      checks.push_back({op, seed, grad_check(p.loss, p.point, options.step, options.tolerance)});
    }
  }
  return checks;
}

}  // namespace ecanet
