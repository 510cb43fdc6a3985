#include "ecanet/audit.hpp"

#include <sstream>

#include "ecanet/errors.hpp"

namespace ecanet {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(std::uint64_t He, std::uint64_t We) {
  if (He == 0 || We == 0) throw GeometryError("analytic_counts: extents must be positive");
}

void require_divides(std::uint64_t He, std::size_t n) {
  if (n == 0 || He % n != 0) {
    throw GeometryError("analytic_counts: height " + std::to_string(He) + " is not divisible into " +
                        std::to_string(n) + " segments");
  }
}
}  // namespace

std::string describe(const AttentionVariant& v) {
  return std::visit(overloaded{
                        [](const audit::NonLocal&) { return std::string("nonlocal"); },
                        [](const audit::HsaNoPool& x) { return "hsa-nopool-n" + std::to_string(x.segments); },
                        [](const audit::Hsa& x) {
                          return "hsa-n" + std::to_string(x.segments) + "-pool" + std::to_string(x.pooled_h) + "x" +
                                 std::to_string(x.pooled_w);
                        },
                        [](const audit::Psa& x) {
                          std::ostringstream os;
                          os << "psa";
                          for (const auto& [h, w] : x.scales) os << '-' << h << 'x' << w;
                          return os.str();
                        },
                    },
                    v);
}

std::uint64_t analytic_counts(std::uint64_t He, std::uint64_t We, const AttentionVariant& v) {
  require_positive(He, We);
  const std::uint64_t pixels = He * We;
  return std::visit(overloaded{
                        [&](const audit::NonLocal&) { return pixels * pixels; },
                        [&](const audit::HsaNoPool& x) {
                          require_divides(He, x.segments);
                          return pixels * pixels / x.segments;
                        },
                        [&](const audit::Hsa& x) {
                          require_divides(He, x.segments);
                          return pixels * x.pooled_h * x.pooled_w;
                        },
                        [&](const audit::Psa& x) {
                          std::uint64_t regions = 0;
                          for (const auto& [h, w] : x.scales) regions += static_cast<std::uint64_t>(h) * w;
                          return pixels * regions;
                        },
                    },
                    v);
}

AffinityLedger measured_counts(const std::function<void()>& run) {
  AffinityLedger ledger;
  LedgerScope scope(ledger);
  run();
  return ledger;
}

}  // namespace ecanet
