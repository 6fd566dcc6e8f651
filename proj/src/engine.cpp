#include "constable/engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace constable {

void ConstableConfig::validate() const {
  if (sld_sets == 0 || sld_ways == 0 || amt_sets == 0 || amt_ways == 0 || amt_pcs_per_entry == 0)
    throw std::invalid_argument("constable tables need at least one set, way and slot");
  if (rmt_stack_capacity == 0 || rmt_other_capacity == 0) throw std::invalid_argument("rmt capacity must be >= 1");
  if (confidence_bits == 0 || confidence_bits > 16) throw std::invalid_argument("confidence_bits must be in [1,16]");
  if (threshold >= (1u << confidence_bits))
    throw std::invalid_argument("threshold must be below 2^confidence_bits");
  if (sld_read_ports == 0 || sld_write_ports == 0) throw std::invalid_argument("sld ports must be >= 1");
}

std::uint32_t hash_pc(std::uint64_t pc) {
  pc &= kAddrMask48;
  return static_cast<std::uint32_t>((pc ^ (pc >> 24)) & 0xffffff);
}

ConstableEngine::ConstableEngine(const ConstableConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  sld_.resize(static_cast<std::size_t>(cfg_.sld_sets) * cfg_.sld_ways);
  rmt_.resize(kNumArchRegs);
  amt_.resize(static_cast<std::size_t>(cfg_.amt_sets) * cfg_.amt_ways);
}

// --- SLD -------------------------------------------------------------------

ConstableEngine::SldEntry* ConstableEngine::sld_find(std::uint32_t hash) {
  SldEntry* base = &sld_[static_cast<std::size_t>(hash % cfg_.sld_sets) * cfg_.sld_ways];
  for (std::uint32_t w = 0; w < cfg_.sld_ways; ++w)
    if (base[w].valid && base[w].tag == hash) return &base[w];
  return nullptr;
}

const ConstableEngine::SldEntry* ConstableEngine::sld_find(std::uint32_t hash) const {
  return const_cast<ConstableEngine*>(this)->sld_find(hash);
}

ConstableEngine::SldEntry& ConstableEngine::sld_allocate(std::uint32_t hash, std::uint64_t pc) {
  SldEntry* base = &sld_[static_cast<std::size_t>(hash % cfg_.sld_sets) * cfg_.sld_ways];
  SldEntry* victim = nullptr;
  for (std::uint32_t w = 0; w < cfg_.sld_ways; ++w) {
    if (!base[w].valid) {
      victim = &base[w];
      break;
    }
    if (!victim || base[w].lru < victim->lru) victim = &base[w];
  }
  // Lists that still name the victim's hash go inert: their resets will miss.
  if (victim->valid) ++stats_.sld_evictions;
  ++stats_.sld_allocations;
  *victim = SldEntry{};
  victim->valid = true;
  victim->tag = hash;
  victim->pc = pc;
  victim->lru = ++clock_;
  return *victim;
}

SldView ConstableEngine::sld(std::uint64_t pc) const {
  const SldEntry* e = sld_find(hash_pc(pc));
  if (!e) return {};
  return {true, e->confidence, e->can_eliminate, e->last_addr, e->last_value};
}

void ConstableEngine::reset_pc(std::uint32_t hash, ResetCause cause) {
  SldEntry* e = sld_find(hash);
  if (!e) return;
  ++stats_.sld_writes;
  e->pending = false;
  if (!e->can_eliminate) return;
  e->can_eliminate = false;
  switch (cause) {
  case ResetCause::Register: ++stats_.flag_resets_register; break;
  case ResetCause::Store: ++stats_.flag_resets_store; break;
  case ResetCause::Snoop: ++stats_.flag_resets_snoop; break;
  case ResetCause::Capacity: ++stats_.flag_resets_capacity; break;
  case ResetCause::Context: ++stats_.flag_resets_context; break;
  case ResetCause::AmtI: ++stats_.flag_resets_amt_i; break;
  case ResetCause::Displacement: ++stats_.flag_resets_displacement; break;
  case ResetCause::Mismatch: ++stats_.flag_resets_mismatch; break;
  }
}

// --- RMT -------------------------------------------------------------------

std::uint32_t ConstableEngine::rmt_capacity(RegId reg) const {
  return (reg == kRsp || reg == kRbp) ? cfg_.rmt_stack_capacity : cfg_.rmt_other_capacity;
}

void ConstableEngine::rmt_insert(RegId reg, std::uint32_t hash) {
  if (reg >= kRip) return;
  auto& list = rmt_[reg];
  ++stats_.rmt_reads;
  if (std::find(list.begin(), list.end(), hash) != list.end()) return;
  if (list.size() >= rmt_capacity(reg)) {
    const std::uint32_t displaced = list.front();
    list.erase(list.begin());
    ++stats_.rmt_displacements;
    reset_pc(displaced, ResetCause::Displacement);
  }
  list.push_back(hash);
  ++stats_.rmt_writes;
  ++stats_.rmt_inserts;
}

std::vector<std::uint32_t> ConstableEngine::take_register_monitor(RegId reg) {
  if (reg >= kRip) return {};
  ++stats_.rmt_reads;
  auto& list = rmt_[reg];
  if (list.empty()) return {};
  ++stats_.rmt_writes;
  std::vector<std::uint32_t> out;
  out.swap(list);
  return out;
}

void ConstableEngine::apply_register_reset(std::uint32_t pc_hash) { reset_pc(pc_hash, ResetCause::Register); }

std::size_t ConstableEngine::on_dest_register_write(RegId reg) {
  const auto list = take_register_monitor(reg);
  for (auto h : list) apply_register_reset(h);
  return list.size();
}

std::vector<std::uint32_t> ConstableEngine::rmt_list(RegId reg) const {
  if (reg >= kRip) return {};
  return rmt_[reg];
}

// --- AMT -------------------------------------------------------------------

std::uint32_t ConstableEngine::amt_set(std::uint64_t addr) const {
  return static_cast<std::uint32_t>((line_of(addr) / kLineBytes) % cfg_.amt_sets);
}

void ConstableEngine::amt_kill(AmtEntry& e, ResetCause cause) {
  for (auto h : e.pcs) reset_pc(h, cause);
  e = AmtEntry{};
  ++stats_.amt_writes;
}

void ConstableEngine::amt_insert(std::uint64_t addr, std::uint8_t size, std::uint32_t hash) {
  const bool full = cfg_.amt_index == AmtIndex::FullAddress;
  const std::uint64_t key = full ? addr : line_of(addr);
  const std::uint8_t key_size = full ? size : static_cast<std::uint8_t>(0);
  AmtEntry* base = &amt_[static_cast<std::size_t>(amt_set(addr)) * cfg_.amt_ways];
  ++stats_.amt_reads;
  AmtEntry* hit = nullptr;
  for (std::uint32_t w = 0; w < cfg_.amt_ways; ++w)
    if (base[w].valid && base[w].key == key && base[w].key_size == key_size) hit = &base[w];
  if (!hit) {
    AmtEntry* victim = nullptr;
    for (std::uint32_t w = 0; w < cfg_.amt_ways; ++w) {
      if (!base[w].valid) {
        victim = &base[w];
        break;
      }
      if (!victim || base[w].lru < victim->lru) victim = &base[w];
    }
    if (victim->valid) {
      ++stats_.amt_evictions_capacity;
      amt_kill(*victim, ResetCause::Capacity);
    }
    victim->valid = true;
    victim->key = key;
    victim->key_size = key_size;
    hit = victim;
  }
  hit->lru = ++clock_;
  if (std::find(hit->pcs.begin(), hit->pcs.end(), hash) != hit->pcs.end()) return;
  if (hit->pcs.size() >= cfg_.amt_pcs_per_entry) {
    const std::uint32_t displaced = hit->pcs.front();
    hit->pcs.erase(hit->pcs.begin());
    ++stats_.amt_displacements;
    reset_pc(displaced, ResetCause::Displacement);
  }
  hit->pcs.push_back(hash);
  ++stats_.amt_writes;
  ++stats_.amt_inserts;
}

std::vector<std::uint32_t> ConstableEngine::amt_list(std::uint64_t paddr) const {
  std::vector<std::uint32_t> out;
  const AmtEntry* base = &amt_[static_cast<std::size_t>(amt_set(paddr)) * cfg_.amt_ways];
  for (std::uint32_t w = 0; w < cfg_.amt_ways; ++w) {
    const AmtEntry& e = base[w];
    if (!e.valid) continue;
    const bool match = cfg_.amt_index == AmtIndex::FullAddress ? e.key == paddr : e.key == line_of(paddr);
    if (match) out.insert(out.end(), e.pcs.begin(), e.pcs.end());
  }
  return out;
}

void ConstableEngine::on_store_resolved(std::uint64_t paddr, std::uint8_t size) {
  if (cfg_.disable_store_invalidation) return;
  AmtEntry* base = &amt_[static_cast<std::size_t>(amt_set(paddr)) * cfg_.amt_ways];
  ++stats_.amt_reads;
  for (std::uint32_t w = 0; w < cfg_.amt_ways; ++w) {
    AmtEntry& e = base[w];
    if (!e.valid) continue;
    bool match;
    if (cfg_.amt_index == AmtIndex::FullAddress)
      match = e.key < paddr + size && paddr < e.key + e.key_size; // byte-range overlap
    else
      match = e.key == line_of(paddr);
    if (!match) continue;
    ++stats_.amt_evictions_store;
    amt_kill(e, ResetCause::Store);
  }
}

void ConstableEngine::on_snoop(std::uint64_t line) {
  AmtEntry* base = &amt_[static_cast<std::size_t>(amt_set(line)) * cfg_.amt_ways];
  ++stats_.amt_reads;
  for (std::uint32_t w = 0; w < cfg_.amt_ways; ++w) {
    AmtEntry& e = base[w];
    if (!e.valid || line_of(e.key) != line_of(line)) continue;
    ++stats_.amt_evictions_snoop;
    amt_kill(e, ResetCause::Snoop);
  }
}

void ConstableEngine::on_amt_invalidate(std::uint64_t line) {
  AmtEntry* base = &amt_[static_cast<std::size_t>(amt_set(line)) * cfg_.amt_ways];
  ++stats_.amt_reads;
  for (std::uint32_t w = 0; w < cfg_.amt_ways; ++w) {
    AmtEntry& e = base[w];
    if (!e.valid || line_of(e.key) != line_of(line)) continue;
    ++stats_.amt_evictions_amt_i;
    amt_kill(e, ResetCause::AmtI);
  }
}

void ConstableEngine::monitor(std::uint32_t hash, const SourceRegs& src, std::uint64_t addr, std::uint8_t size) {
  for (RegId r : src)
    if (r != kRip) rmt_insert(r, hash);
  amt_insert(addr, size, hash);
}

// --- rename / writeback ----------------------------------------------------

bool ConstableEngine::would_eliminate(std::uint64_t pc) const {
  const SldEntry* e = sld_find(hash_pc(pc));
  return e && e->can_eliminate && xprf_owners_.size() < cfg_.xprf_size;
}

LookupResult ConstableEngine::lookup_at_rename(std::uint64_t pc, const SourceRegs& src, std::uint64_t uid) {
  const std::uint32_t h = hash_pc(pc);
  ++stats_.sld_reads;
  SldEntry* e = sld_find(h);
  if (!e) {
    sld_allocate(h, pc);
    ++stats_.sld_writes;
    return {};
  }
  e->lru = ++clock_;
  if (e->pc != pc) {
    ++stats_.sld_collisions;
    e->pc = pc;
  }
  if (e->can_eliminate) {
    if (xprf_owners_.size() >= cfg_.xprf_size) {
      ++stats_.xprf_full_rejections;
      return {};
    }
    xprf_owners_.push_back(uid);
    ++stats_.eliminations;
    return {RenameDecision::Eliminate, e->last_value, e->last_addr, e->last_size};
  }
  if (e->has_last && e->confidence >= cfg_.threshold) {
    ++stats_.likely_stable_marks;
    // Monitoring starts now, not at writeback, so a register write or store
    // that lands between this rename and the writeback is not lost.
    if (!e->pending) {
      e->pending = true;
      e->pending_uid = uid;
    }
    monitor(h, src, e->last_addr, e->last_size);
    return {RenameDecision::MarkLikelyStable, 0, e->last_addr, e->last_size};
  }
  return {};
}

WritebackResult ConstableEngine::on_writeback(std::uint64_t pc, const SourceRegs& src, std::uint64_t paddr,
                                              std::uint8_t size, std::uint64_t value, bool marked_likely_stable,
                                              std::uint64_t uid) {
  const std::uint32_t h = hash_pc(pc);
  ++stats_.sld_reads;
  SldEntry* e = sld_find(h);
  if (!e) return {};
  ++stats_.sld_writes;
  const bool matched = e->has_last && e->last_addr == paddr && e->last_value == value && e->last_size == size;
  if (matched) {
    e->confidence = std::min(e->confidence + 1, cfg_.max_confidence());
  } else {
    e->confidence /= 2;
    e->has_last = true;
    e->last_addr = paddr;
    e->last_value = value;
    e->last_size = size;
    e->pending = false;
    if (e->can_eliminate) {
      e->can_eliminate = false;
      ++stats_.flag_resets_mismatch;
    }
    return {};
  }
  if (!marked_likely_stable || e->can_eliminate || !e->pending || uid < e->pending_uid) return {};
  monitor(h, src, paddr, size);
  // monitor() may have displaced this very PC from a full list.
  e = sld_find(h);
  if (!e || !e->pending) return {};
  e->can_eliminate = true;
  ++stats_.flags_set;
  return {cfg_.amt_i_mode ? false : true};
}

void ConstableEngine::on_context_switch() {
  for (auto& e : sld_) {
    if (!e.valid) continue;
    if (e.can_eliminate) ++stats_.flag_resets_context;
    e.can_eliminate = false;
    e.pending = false;
    if (cfg_.context_switch_clears_confidence) e.confidence = 0;
  }
  for (auto& l : rmt_) l.clear();
  for (auto& a : amt_) a = AmtEntry{};
}

void ConstableEngine::release_xprf(std::uint64_t uid) {
  auto it = std::find(xprf_owners_.begin(), xprf_owners_.end(), uid);
  if (it != xprf_owners_.end()) xprf_owners_.erase(it);
}

} // namespace constable
