#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ecanet/ledger.hpp"

namespace ecanet {

namespace audit {
struct NonLocal {};
struct HsaNoPool {
  std::size_t segments;
};
struct Hsa {
  std::size_t segments;
  std::size_t pooled_h;
  std::size_t pooled_w;
};
struct Psa {
  std::vector<std::pair<std::size_t, std::size_t>> scales;
};
}  // namespace audit

using AttentionVariant = std::variant<audit::NonLocal, audit::HsaNoPool, audit::Hsa, audit::Psa>;

std::string describe(const AttentionVariant& v);

/// Closed-form affinity entry count:
///   NonLocal  (He*We)^2
///   HsaNoPool (He*We)^2 / N
///   Hsa       He*We*Hp*Wp
///   Psa       He*We * sum_i Hp_i*Wp_i
/// HSA variants require N | He (GeometryError otherwise).
std::uint64_t analytic_counts(std::uint64_t He, std::uint64_t We, const AttentionVariant& v);

/// Runs `run` with a fresh ledger attached to this thread and returns it.
AffinityLedger measured_counts(const std::function<void()>& run);

}  // namespace ecanet
