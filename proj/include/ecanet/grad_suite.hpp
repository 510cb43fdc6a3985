#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecanet/autodiff.hpp"

namespace ecanet {

struct GradSuiteOptions {
  std::vector<std::string> ops;  // empty runs every op
  std::size_t seeds = 5;
  std::uint64_t base_seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t channels = 4;
  std::size_t height = 8;
  std::size_t width = 16;
};

struct OpCheck {
  std::string op;
  std::uint64_t seed = 0;
  std::vector<GradCheckReport> reports;

  bool passed() const;
};

/// matmul, softmax, pool, project, split, concat, hsa, psa, ecanet.
const std::vector<std::string>& grad_suite_ops();

/// Finite-difference check of every primitive and composed attention module
/// under random weighted-sum losses. One OpCheck per (op, seed).
std::vector<OpCheck> run_grad_suite(const GradSuiteOptions& options);

}  // namespace ecanet
