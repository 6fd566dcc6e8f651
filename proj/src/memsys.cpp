#include "constable/memsys.hpp"

#include <algorithm>
#include <stdexcept>

#include "constable/trace.hpp"

namespace constable {

SetAssocCache::SetAssocCache(std::uint64_t size_bytes, std::uint32_t ways) : ways_(ways) {
  if (ways == 0 || size_bytes % (kLineBytes * ways) != 0)
    throw std::invalid_argument("cache size must be a multiple of ways * line size");
  sets_ = static_cast<std::uint32_t>(size_bytes / (kLineBytes * ways));
  ways_storage_.resize(static_cast<std::size_t>(sets_) * ways_);
}

std::uint32_t SetAssocCache::set_index(std::uint64_t line) const {
  return static_cast<std::uint32_t>((line / kLineBytes) % sets_);
}

SetAssocCache::Way* SetAssocCache::find(std::uint64_t line) {
  Way* base = &ways_storage_[static_cast<std::size_t>(set_index(line)) * ways_];
  for (std::uint32_t w = 0; w < ways_; ++w)
    if (base[w].valid && base[w].line == line) return &base[w];
  return nullptr;
}

const SetAssocCache::Way* SetAssocCache::find(std::uint64_t line) const {
  return const_cast<SetAssocCache*>(this)->find(line);
}

bool SetAssocCache::contains(std::uint64_t line) const { return find(line) != nullptr; }

std::optional<std::uint64_t> SetAssocCache::touch(std::uint64_t line) {
  Way* w = find(line);
  if (!w) return std::nullopt;
  w->lru = ++clock_;
  return w->ready;
}

std::optional<std::uint64_t> SetAssocCache::fill(std::uint64_t line, std::uint64_t ready_cycle) {
  Way* base = &ways_storage_[static_cast<std::size_t>(set_index(line)) * ways_];
  Way* victim = nullptr;
  for (std::uint32_t w = 0; w < ways_; ++w) {
    if (!base[w].valid) {
      victim = &base[w];
      break;
    }
    if (!victim || base[w].lru < victim->lru) victim = &base[w];
  }
  std::optional<std::uint64_t> evicted;
  if (victim->valid) evicted = victim->line;
  *victim = Way{line, ++clock_, ready_cycle, true};
  return evicted;
}

bool SetAssocCache::invalidate(std::uint64_t line) {
  Way* w = find(line);
  if (!w) return false;
  w->valid = false;
  return true;
}

// ---------------------------------------------------------------------------

Memsys::Memsys(const CacheConfig& cfg, EvictionPolicy policy)
    : cfg_(cfg), policy_(policy), l1_(cfg.l1d.size_bytes, cfg.l1d.ways), l2_(cfg.l2.size_bytes, cfg.l2.ways) {}

void Memsys::mark_held(std::uint64_t line) { directory_[line].cv_bits |= 1u << kOwnCore; }

void Memsys::maybe_drop_cv(std::uint64_t line) {
  if (l1_.contains(line) || l2_.contains(line)) return;
  auto it = directory_.find(line);
  if (it == directory_.end()) return;
  if (it->second.pinned_bits & (1u << kOwnCore)) return;
  it->second.cv_bits &= static_cast<std::uint8_t>(~(1u << kOwnCore));
}

void Memsys::on_l1_evicted(std::uint64_t line) {
  ++stats_.l1d_evictions;
  maybe_drop_cv(line);
  if (policy_ == EvictionPolicy::AmtInvalidate && listener_) listener_->on_l1_eviction(line);
}

void Memsys::on_l2_evicted(std::uint64_t line) { maybe_drop_cv(line); }

AccessResult Memsys::access_load(std::uint64_t paddr, std::uint64_t cycle) {
  const std::uint64_t line = line_of(paddr);
  ++stats_.l1d_load_accesses;
  if (auto ready = l1_.touch(line)) {
    ++stats_.l1d_hits;
    return {std::max<std::uint64_t>(cycle + cfg_.l1d.latency, *ready), HitLevel::L1};
  }
  ++stats_.l1d_misses;
  AccessResult res;
  if (auto ready = l2_.touch(line)) {
    ++stats_.l2_hits;
    res = {std::max<std::uint64_t>(cycle + cfg_.l2.latency, *ready), HitLevel::L2};
  } else {
    ++stats_.l2_misses;
    res = {cycle + cfg_.memory_latency, HitLevel::Memory};
    if (auto victim = l2_.fill(line, res.completion_cycle)) on_l2_evicted(*victim);
  }
  mark_held(line);
  if (auto victim = l1_.fill(line, res.completion_cycle)) on_l1_evicted(*victim);
  return res;
}

void Memsys::access_store(std::uint64_t paddr, std::uint64_t cycle) {
  const std::uint64_t line = line_of(paddr);
  ++stats_.l1d_store_accesses;
  if (l1_.touch(line)) return;
  std::uint64_t ready = cycle;
  if (!l2_.touch(line)) {
    if (auto victim = l2_.fill(line, cycle)) on_l2_evicted(*victim);
  }
  mark_held(line);
  if (auto victim = l1_.fill(line, ready)) on_l1_evicted(*victim);
}

void Memsys::pin_cv(unsigned core, std::uint64_t line) {
  if (policy_ != EvictionPolicy::PinCv) return;
  auto& e = directory_[line];
  e.cv_bits |= static_cast<std::uint8_t>(1u << core);
  e.pinned_bits |= static_cast<std::uint8_t>(1u << core);
  ++stats_.pins;
}

bool Memsys::remote_write(std::uint64_t line, std::uint64_t cycle) {
  if (!cv_set(kOwnCore, line)) {
    ++stats_.snoops_filtered;
    return false;
  }
  deliver_snoop(kOwnCore, line, cycle);
  return true;
}

void Memsys::deliver_snoop(unsigned core, std::uint64_t line, std::uint64_t /*cycle*/) {
  ++stats_.snoops_delivered;
  if (core == kOwnCore) {
    l1_.invalidate(line);
    l2_.invalidate(line);
  }
  auto it = directory_.find(line);
  if (it != directory_.end()) {
    it->second.cv_bits &= static_cast<std::uint8_t>(~(1u << core));
    it->second.pinned_bits &= static_cast<std::uint8_t>(~(1u << core));
  }
  if (core == kOwnCore && listener_) listener_->on_snoop(line);
}

void Memsys::clear_all_pins(unsigned core) {
  const auto bit = static_cast<std::uint8_t>(1u << core);
  for (auto& [line, e] : directory_) {
    if (!(e.pinned_bits & bit)) continue;
    e.pinned_bits &= static_cast<std::uint8_t>(~bit);
    if (core == kOwnCore && !l1_.contains(line) && !l2_.contains(line))
      e.cv_bits &= static_cast<std::uint8_t>(~bit);
  }
}

bool Memsys::cv_set(unsigned core, std::uint64_t line) const {
  auto it = directory_.find(line);
  return it != directory_.end() && (it->second.cv_bits & (1u << core));
}

bool Memsys::pinned(unsigned core, std::uint64_t line) const {
  auto it = directory_.find(line);
  return it != directory_.end() && (it->second.pinned_bits & (1u << core));
}

} // namespace constable
