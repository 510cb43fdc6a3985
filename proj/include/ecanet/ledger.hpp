#pragma once

#include <cstdint>

namespace ecanet {

/// Instrumented attention counters. Counters only grow until reset().
struct AffinityLedger {
  std::uint64_t affinity_entries = 0;   // attention-map elements created
  std::uint64_t attention_macs = 0;     // multiplies in the attention products
  std::uint64_t peak_live_entries = 0;  // largest simultaneously live affinity total
  std::uint64_t live_entries = 0;

  void reset() { *this = AffinityLedger{}; }
};

/// Attaches a ledger to the calling thread for the lifetime of the scope.
/// Scopes nest; the previous ledger is restored on destruction.
class LedgerScope {
 public:
  explicit LedgerScope(AffinityLedger& ledger);
  ~LedgerScope();
  LedgerScope(const LedgerScope&) = delete;
  LedgerScope& operator=(const LedgerScope&) = delete;

 private:
  AffinityLedger* previous_;
};

AffinityLedger* active_ledger();

void record_macs(std::uint64_t count);
void acquire_affinity(std::uint64_t entries);
void release_affinity(std::uint64_t entries);

}  // namespace ecanet
