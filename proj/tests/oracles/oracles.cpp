#include "oracles.hpp"

#include <algorithm>

namespace oracle {

std::map<std::uint64_t, std::uint64_t> expected_load_values(const Trace& t) {
  std::map<std::uint64_t, std::uint8_t> bytes;
  for (const auto& c : t.init)
    for (std::size_t i = 0; i < c.bytes.size(); ++i) bytes[c.paddr + i] = c.bytes[i];
  std::map<std::uint64_t, std::uint64_t> out;
  for (const auto& r : t.records) {
    if (r.is_load()) {
      std::uint64_t v = 0;
      for (unsigned i = 0; i < r.mem_size; ++i) {
        auto it = bytes.find(r.mem_paddr + i);
        const std::uint64_t b = it == bytes.end() ? 0 : it->second;
        v |= b << (8 * i);
      }
      out[r.seq_no] = v;
    } else if (r.is_store()) {
      for (unsigned i = 0; i < r.mem_size; ++i) bytes[r.mem_paddr + i] = static_cast<std::uint8_t>(r.mem_value >> (8 * i));
    }
  }
  return out;
}

// --- LRU cache ---------------------------------------------------------------

LruCache::LruCache(std::uint64_t size_bytes, std::uint32_t ways) : ways_(ways), sets_(size_bytes / 64 / ways) {}

std::list<std::uint64_t>& LruCache::set_of(std::uint64_t line) { return sets_[(line / 64) % sets_.size()]; }

bool LruCache::access(std::uint64_t line, std::optional<std::uint64_t>* evicted) {
  auto& s = set_of(line);
  auto it = std::find(s.begin(), s.end(), line);
  if (it != s.end()) {
    s.erase(it);
    s.push_front(line);
    return true;
  }
  if (s.size() == ways_) {
    if (evicted) *evicted = s.back();
    s.pop_back();
  }
  s.push_front(line);
  return false;
}

bool LruCache::contains(std::uint64_t line) const {
  const auto& s = sets_[(line / 64) % sets_.size()];
  return std::find(s.begin(), s.end(), line) != s.end();
}

void LruCache::invalidate(std::uint64_t line) { set_of(line).remove(line); }

// --- inspector -----------------------------------------------------------------

InspectorReport reference_analyze(const Trace& t) {
  // Pass 1: every dynamic instance per PC with its instruction index.
  struct Inst {
    std::uint64_t index, addr, value;
    SourceRegs src;
  };
  std::map<std::uint64_t, std::vector<Inst>> by_pc;
  std::uint64_t index = 0;
  for (const auto& r : t.records) {
    if (r.kind != RecordKind::Instruction) continue;
    if (r.op == OpClass::Load) by_pc[r.pc].push_back({index, r.mem_paddr, r.mem_value, r.src});
    ++index;
  }

  // Pass 2: per-PC facts, then totals.
  InspectorReport rep;
  std::uint64_t dyn = 0, stable_dyn = 0;
  std::uint64_t mode_dyn[3] = {}, bins[3] = {}, mode_bins[3][3] = {};
  for (const auto& [pc, v] : by_pc) {
    StaticLoadProfile p;
    p.pc = pc;
    p.dynamic_count = v.size();
    p.stable_paddr = v[0].addr;
    p.stable_value = v[0].value;
    p.is_global_stable = std::all_of(v.begin(), v.end(),
                                     [&](const Inst& i) { return i.addr == v[0].addr && i.value == v[0].value; });
    const SourceRegs& s = v[0].src;
    bool only_stack = true;
    for (RegId r : s) only_stack = only_stack && (r == kRsp || r == kRbp);
    if (s.size() == 1 && s[0] == kRip) p.mode = AddressingMode::PcRel;
    else if (only_stack) p.mode = AddressingMode::StackRel;
    else p.mode = AddressingMode::RegRel;
    std::vector<std::uint64_t> d;
    for (std::size_t i = 1; i < v.size(); ++i) d.push_back(v[i].index - v[i - 1].index);
    for (auto x : d) ++p.distance_histogram[x < 50 ? 0 : (x <= 250 ? 1 : 2)];
    if (!d.empty()) {
      std::sort(d.begin(), d.end());
      p.median_distance = d[(d.size() - 1) / 2];
    }
    dyn += p.dynamic_count;
    if (p.is_global_stable) {
      const int m = static_cast<int>(p.mode);
      stable_dyn += p.dynamic_count;
      mode_dyn[m] += p.dynamic_count;
      for (int b = 0; b < 3; ++b) {
        bins[b] += p.distance_histogram[b];
        mode_bins[m][b] += p.distance_histogram[b];
      }
    }
    rep.profiles[pc] = p;
  }
  auto& a = rep.aggregates;
  auto div = [](std::uint64_t n, std::uint64_t d) { return d ? static_cast<double>(n) / static_cast<double>(d) : 0.0; };
  a.dynamic_loads = dyn;
  a.global_stable_dynamic_loads = stable_dyn;
  a.global_stable_dynamic_fraction = div(stable_dyn, dyn);
  const std::uint64_t all_bins = bins[0] + bins[1] + bins[2];
  for (int m = 0; m < 3; ++m) {
    a.mode_breakdown[m] = div(mode_dyn[m], stable_dyn);
    const std::uint64_t row = mode_bins[m][0] + mode_bins[m][1] + mode_bins[m][2];
    for (int b = 0; b < 3; ++b) a.per_mode_distance_breakdown[m][b] = div(mode_bins[m][b], row);
  }
  for (int b = 0; b < 3; ++b) a.distance_breakdown[b] = div(bins[b], all_bins);
  return rep;
}

// --- sequential Constable --------------------------------------------------------

StepThrough::StepThrough(const ConstableConfig& cfg)
    : cfg_(cfg), sld_lru_(cfg.sld_sets), rmt_(kNumArchRegs), amt_(cfg.amt_sets) {}

std::uint32_t StepThrough::key(std::uint64_t pc) const {
  pc &= (std::uint64_t{1} << 48) - 1;
  return static_cast<std::uint32_t>((pc ^ (pc >> 24)) & 0xffffff);
}

StepThrough::Entry* StepThrough::find(std::uint32_t k) {
  auto it = sld_.find(k);
  return it == sld_.end() ? nullptr : &it->second;
}

std::optional<std::uint32_t> StepThrough::confidence(std::uint64_t pc) const {
  auto it = sld_.find(key(pc));
  if (it == sld_.end()) return std::nullopt;
  return it->second.conf;
}

bool StepThrough::flag(std::uint64_t pc) const {
  auto it = sld_.find(key(pc));
  return it != sld_.end() && it->second.flag;
}

void StepThrough::reset(std::uint32_t k) {
  Entry* e = find(k);
  if (!e) return;
  e->pending = false;
  if (e->flag) ++flag_resets;
  e->flag = false;
}

void StepThrough::watch_register(RegId r, std::uint32_t k) {
  if (r == kRip) return;
  auto& l = rmt_[r];
  if (std::find(l.begin(), l.end(), k) != l.end()) return;
  const std::size_t cap = (r == kRsp || r == kRbp) ? cfg_.rmt_stack_capacity : cfg_.rmt_other_capacity;
  if (l.size() >= cap) {
    const auto victim = l.front();
    l.pop_front();
    reset(victim);
  }
  l.push_back(k);
}

void StepThrough::kill(std::list<Watch>& set, std::list<Watch>::iterator it) {
  const auto pcs = it->pcs;
  set.erase(it);
  for (auto k : pcs) reset(k);
}

void StepThrough::watch_address(std::uint64_t addr, std::uint8_t size, std::uint32_t k) {
  const bool full = cfg_.amt_index == AmtIndex::FullAddress;
  const std::uint64_t line = addr & ~std::uint64_t{63};
  const std::uint64_t wkey = full ? addr : line;
  const std::uint8_t wsize = full ? size : 0;
  auto& set = amt_[(line / 64) % cfg_.amt_sets];
  auto it = std::find_if(set.begin(), set.end(), [&](const Watch& w) { return w.key == wkey && w.key_size == wsize; });
  if (it == set.end()) {
    if (set.size() >= cfg_.amt_ways) kill(set, std::prev(set.end()));
    set.push_front(Watch{wkey, wsize, {}});
  } else {
    set.splice(set.begin(), set, it);
  }
  Watch& w = set.front();
  if (std::find(w.pcs.begin(), w.pcs.end(), k) != w.pcs.end()) return;
  if (w.pcs.size() >= cfg_.amt_pcs_per_entry) {
    const auto victim = w.pcs.front();
    w.pcs.pop_front();
    reset(victim);
  }
  w.pcs.push_back(k);
}

void StepThrough::load(const TraceRecord& r) {
  const std::uint32_t k = key(r.pc);
  auto& lru = sld_lru_[k % cfg_.sld_sets];
  Decision d = Decision::Normal;
  Entry* e = find(k);
  if (!e) {
    if (lru.size() >= cfg_.sld_ways) {
      sld_.erase(lru.back());
      lru.pop_back();
    }
    lru.push_front(k);
    e = &sld_[k];
  } else {
    lru.splice(lru.begin(), lru, std::find(lru.begin(), lru.end(), k));
    if (e->flag) {
      d = Decision::Eliminate;
    } else if (e->has_last && e->conf >= cfg_.threshold) {
      d = Decision::Mark;
      e->pending = true;
      for (RegId s : r.src) watch_register(s, k);
      watch_address(e->addr, e->size, k);
    }
  }
  decisions.push_back(d);
  load_seq.push_back(r.seq_no);
  if (d == Decision::Eliminate) ++eliminations;
  if (d == Decision::Mark) ++marks;

  if (r.dst != kNoReg && r.dst != kRip) {
    auto list = std::move(rmt_[r.dst]);
    rmt_[r.dst].clear();
    for (auto x : list) reset(x);
  }
  if (d == Decision::Eliminate) return;

  e = find(k);
  const bool same = e->has_last && e->addr == r.mem_paddr && e->value == r.mem_value && e->size == r.mem_size;
  if (!same) {
    e->conf /= 2;
    e->has_last = true;
    e->addr = r.mem_paddr;
    e->value = r.mem_value;
    e->size = r.mem_size;
    e->pending = false;
    if (e->flag) ++flag_resets;
    e->flag = false;
    return;
  }
  e->conf = std::min(e->conf + 1, (1u << cfg_.confidence_bits) - 1);
  if (d != Decision::Mark || e->flag || !e->pending) return;
  for (RegId s : r.src) watch_register(s, k);
  watch_address(r.mem_paddr, r.mem_size, k);
  e = find(k);
  if (e->pending) e->flag = true;
}

void StepThrough::feed(const TraceRecord& r) {
  switch (r.kind) {
  case RecordKind::Snoop: {
    const std::uint64_t line = r.snoop_paddr & ~std::uint64_t{63};
    auto& set = amt_[(line / 64) % cfg_.amt_sets];
    for (auto it = set.begin(); it != set.end();) {
      auto next = std::next(it);
      if ((it->key & ~std::uint64_t{63}) == line) kill(set, it);
      it = next;
    }
    return;
  }
  case RecordKind::ContextSwitch:
    for (auto& [k, e] : sld_) {
      if (e.flag) ++flag_resets;
      e.flag = false;
      e.pending = false;
      if (cfg_.context_switch_clears_confidence) e.conf = 0;
    }
    for (auto& l : rmt_) l.clear();
    for (auto& s : amt_) s.clear();
    return;
  case RecordKind::Instruction: break;
  }
  if (r.op == OpClass::Load) {
    load(r);
    return;
  }
  if (r.op == OpClass::Store && !cfg_.disable_store_invalidation) {
    const std::uint64_t line = r.mem_paddr & ~std::uint64_t{63};
    auto& set = amt_[(line / 64) % cfg_.amt_sets];
    for (auto it = set.begin(); it != set.end();) {
      auto next = std::next(it);
      const bool hit = cfg_.amt_index == AmtIndex::FullAddress
                           ? (it->key < r.mem_paddr + r.mem_size && r.mem_paddr < it->key + it->key_size)
                           : it->key == line;
      if (hit) kill(set, it);
      it = next;
    }
  }
  if (r.dst != kNoReg && r.dst != kRip) {
    auto list = std::move(rmt_[r.dst]);
    rmt_[r.dst].clear();
    for (auto x : list) reset(x);
  }
}

} // namespace oracle
