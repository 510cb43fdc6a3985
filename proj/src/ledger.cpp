#include "ecanet/ledger.hpp"

#include <algorithm>

namespace ecanet {
namespace {
thread_local AffinityLedger* t_active = nullptr;
}  // namespace

LedgerScope::LedgerScope(AffinityLedger& ledger) : previous_(t_active) { t_active = &ledger; }

LedgerScope::~LedgerScope() { t_active = previous_; }

AffinityLedger* active_ledger() { return t_active; }

void record_macs(std::uint64_t count) {
  if (t_active) t_active->attention_macs += count;
}

void acquire_affinity(std::uint64_t entries) {
  if (!t_active) return;
  t_active->affinity_entries += entries;
  t_active->live_entries += entries;
  t_active->peak_live_entries = std::max(t_active->peak_live_entries, t_active->live_entries);
}

void release_affinity(std::uint64_t entries) {
  if (!t_active) return;
  t_active->live_entries -= std::min(entries, t_active->live_entries);
}

}  // namespace ecanet
