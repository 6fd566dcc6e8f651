#include "constable/workload.hpp"

#include <cmath>
#include <queue>
#include <random>
#include <vector>

#include "constable/memory_image.hpp"

namespace constable {

namespace {

// Address map. Every region is disjoint at byte granularity, so a store to
// one can never change a value loaded from another.
constexpr std::uint64_t kStableBase = 0x0100000;
constexpr std::uint64_t kPhaseBase = 0x0800000;
constexpr std::uint64_t kDynBase = 0x1000000;
constexpr std::uint64_t kDynBytes = 256 * 1024;
constexpr std::uint64_t kFarBase = 0x10000000;
constexpr std::uint64_t kFarLines = std::uint64_t{1} << 20;

// PCs stay below 2^24 so the folded SLD hash is the identity (no aliasing).
constexpr std::uint64_t kStablePcBase = 0x010000;
constexpr std::uint64_t kPhasePcBase = 0x800000;
constexpr std::uint64_t kDynPcBase = 0x900000;
constexpr std::uint64_t kOtherPcBase = 0xa00000;

constexpr std::size_t kPhasePool = 16;
constexpr std::size_t kDynPool = 64;

constexpr std::uint64_t kBinLo[3] = {2, 60, 260};
constexpr std::uint64_t kBinHi[3] = {40, 240, 1000};

constexpr RegId kGeneralLo = 6; // 6..15 carry ordinary dataflow

class Rng {
public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  std::uint64_t bits() { return g_(); }
  double u01() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) { return n <= 1 ? 0 : g_() % n; }
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }
  bool chance(double p) { return p > 0 && u01() < p; }
  std::uint64_t geometric(double mean) { return static_cast<std::uint64_t>(-std::log1p(-u01()) * mean); }

private:
  std::mt19937_64 g_;
};

struct StablePc {
  std::uint64_t pc = 0;
  SourceRegs src;
  std::uint64_t addr = 0;
  std::uint8_t size = 8;
  std::size_t mode = 0;
  std::uint64_t remaining = 0; // instances still to emit after the current one
  bool live = false;
};

struct PhasePc {
  std::uint64_t pc = 0;
  SourceRegs src;
  std::uint64_t addr = 0;
  std::uint8_t size = 8;
  std::uint64_t instances = 0;
  std::uint64_t until_change = 0;
};

struct DynPc {
  std::uint64_t pc = 0;
  RegId reg = kGeneralLo;
  std::uint64_t instances = 0;
  std::uint64_t last_addr = 0;
  std::uint64_t last_index = 0;
};

std::uint64_t size_mask(unsigned size) { return size >= 8 ? ~std::uint64_t{0} : (std::uint64_t{1} << (8 * size)) - 1; }

class Generator {
public:
  explicit Generator(const GenConfig& c) : c_(c), rng_(c.seed ^ 0x9e3779b97f4a7c15ULL) {
    reg_written_.fill(kNever);
    for (std::size_t b = 0; b < 3; ++b)
      mean_distance_ += c_.inter_occurrence_profile[b] * static_cast<double>(kBinLo[b] + kBinHi[b]) / 2.0;
    if (mean_distance_ <= 0) mean_distance_ = 1;
  }

  Trace run();

private:
  static constexpr std::uint64_t kNever = UINT64_MAX;

  void emit(TraceRecord r);
  RegId general_reg() { return static_cast<RegId>(kGeneralLo + rng_.below(16 - kGeneralLo)); }
  SourceRegs general_srcs();
  std::uint64_t other_pc() { return kOtherPcBase + 4 * rng_.below(4096); }
  std::uint64_t init_slot(std::uint64_t addr);

  void emit_stable(std::size_t id);
  void spawn_stable();
  std::size_t choose_mode();
  void emit_nonstable_load();
  void emit_phase_load();
  void emit_dyn_load(bool far);
  void move_phase(PhasePc& p);
  void emit_store();
  void emit_alu();
  void emit_filler();
  void ensure_written(RegId r, std::uint64_t since);

  const GenConfig& c_;
  Rng rng_;
  Trace t_;
  MemoryImage mem_;
  std::uint64_t idx_ = 0; // instructions emitted
  std::uint64_t seq_ = 0;
  std::array<std::uint64_t, kNumArchRegs> reg_written_{};

  std::vector<StablePc> stable_;
  std::vector<std::size_t> live_stable_;
  using Due = std::pair<std::uint64_t, std::size_t>;
  std::priority_queue<Due, std::vector<Due>, std::greater<Due>> due_;
  std::uint64_t next_stable_slot_ = 0;
  std::uint64_t next_phase_slot_ = 0;
  double mean_distance_ = 0;

  std::vector<PhasePc> phase_;
  std::vector<DynPc> dyn_;

  std::uint64_t stable_emitted_ = 0;
  std::uint64_t nonstable_emitted_ = 0;
  std::array<std::uint64_t, 3> mode_emitted_{};
  std::array<std::uint64_t, 3> bin_scheduled_{};
};

void Generator::emit(TraceRecord r) {
  r.seq_no = seq_++;
  if (r.is_instruction()) {
    if (r.has_dst()) reg_written_[r.dst] = idx_;
    ++idx_;
  }
  t_.records.push_back(r);
}

SourceRegs Generator::general_srcs() {
  SourceRegs s;
  s.push(general_reg());
  if (rng_.chance(0.5)) {
    RegId b = general_reg();
    if (b != s[0]) s.push(b);
  }
  return s;
}

std::uint64_t Generator::init_slot(std::uint64_t addr) {
  InitChunk chunk{addr, {}};
  std::uint64_t v = rng_.bits();
  for (int i = 0; i < 8; ++i) chunk.bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  mem_.apply(chunk);
  t_.init.push_back(std::move(chunk));
  return v;
}

void Generator::ensure_written(RegId r, std::uint64_t since) {
  // An address may only change after one of its source registers changed.
  if (reg_written_[r] != kNever && reg_written_[r] >= since) return;
  SourceRegs s{r};
  emit(TraceRecord::alu(0, other_pc(), r, s));
}

std::size_t Generator::choose_mode() {
  // Balance expected dynamic instances: realized so far plus what live PCs
  // are still likely to emit before the trace ends.
  std::array<double, 3> have{};
  for (std::size_t m = 0; m < 3; ++m) have[m] = static_cast<double>(mode_emitted_[m]);
  const double left = static_cast<double>(c_.n_instructions - idx_) / mean_distance_;
  for (std::size_t id : live_stable_) {
    const StablePc& p = stable_[id];
    have[p.mode] += std::min(static_cast<double>(p.remaining), left);
  }
  double total = have[0] + have[1] + have[2] + 1;
  std::size_t best = 3;
  double best_score = 0;
  for (std::size_t m = 0; m < 3; ++m) {
    if (c_.addressing_mode_mix[m] <= 0) continue;
    const double score = c_.addressing_mode_mix[m] * total - have[m];
    if (best == 3 || score > best_score) {
      best = m;
      best_score = score;
    }
  }
  return best;
}

void Generator::spawn_stable() {
  StablePc p;
  p.pc = kStablePcBase + 4 * stable_.size();
  p.mode = choose_mode();
  switch (p.mode) {
  case 0: p.src = {kRip}; break;
  case 1: {
    const auto k = rng_.below(10);
    p.src = k < 5 ? SourceRegs{kRsp} : k < 8 ? SourceRegs{kRbp} : SourceRegs{kRsp, kRbp};
    break;
  }
  default: {
    const auto k = rng_.below(4);
    p.src = k == 0 ? SourceRegs{0} : k == 1 ? SourceRegs{1} : k == 2 ? SourceRegs{0, 1} : SourceRegs{kRsp, 0};
    break;
  }
  }
  const std::uint64_t k = next_stable_slot_++;
  p.addr = kStableBase + (k / 4) * kLineBytes + (k % 4) * 16;
  p.size = rng_.chance(0.2) ? 4 : 8;
  init_slot(p.addr);
  p.remaining = rng_.geometric(c_.mean_stable_lifetime - 1);
  p.live = true;
  stable_.push_back(p);
  live_stable_.push_back(stable_.size() - 1);
  emit_stable(stable_.size() - 1);
}

void Generator::emit_stable(std::size_t id) {
  StablePc& p = stable_[id];
  const std::uint64_t here = idx_;
  emit(TraceRecord::load(0, p.pc, general_reg(), p.src, p.addr, p.size, mem_.read(p.addr, p.size)));
  ++stable_emitted_;
  ++mode_emitted_[p.mode];
  if (p.remaining > 0) {
    --p.remaining;
    std::size_t bin = 3;
    double best = 0;
    const double total = static_cast<double>(bin_scheduled_[0] + bin_scheduled_[1] + bin_scheduled_[2] + 1);
    for (std::size_t b = 0; b < 3; ++b) {
      if (c_.inter_occurrence_profile[b] <= 0) continue;
      const double score = c_.inter_occurrence_profile[b] * total - static_cast<double>(bin_scheduled_[b]);
      if (bin == 3 || score > best) {
        bin = b;
        best = score;
      }
    }
    const std::uint64_t at = here + rng_.range(kBinLo[bin], kBinHi[bin]);
    if (at < c_.n_instructions) {
      ++bin_scheduled_[bin];
      due_.emplace(at, id);
      return;
    }
  }
  p.live = false;
  for (std::size_t i = 0; i < live_stable_.size(); ++i)
    if (live_stable_[i] == id) {
      live_stable_[i] = live_stable_.back();
      live_stable_.pop_back();
      break;
    }
}

void Generator::move_phase(PhasePc& p) {
  emit(TraceRecord::alu(0, other_pc(), p.src[0], SourceRegs{p.src[0]}));
  p.addr = kPhaseBase + 16 * next_phase_slot_++;
  init_slot(p.addr);
  p.until_change = 1 + rng_.geometric(c_.mean_phase_length - 1);
}

void Generator::emit_phase_load() {
  if (phase_.empty()) {
    for (std::size_t i = 0; i < kPhasePool; ++i) {
      PhasePc p;
      p.pc = kPhasePcBase + 4 * i;
      const auto k = rng_.below(3);
      p.src = k == 0 ? SourceRegs{2} : k == 1 ? SourceRegs{3} : SourceRegs{2, 3};
      p.size = rng_.chance(0.25) ? 4 : 8;
      p.addr = kPhaseBase + 16 * next_phase_slot_++;
      init_slot(p.addr);
      phase_.push_back(p);
    }
  }
  // A PC seen once and never changed would look global-stable; give it its
  // second, address-changing instance first.
  PhasePc* p = nullptr;
  for (auto& q : phase_)
    if (q.instances == 1) p = &q;
  if (!p) p = &phase_[rng_.below(phase_.size())];
  if (p->instances == 1 || (p->instances > 1 && p->until_change == 0)) move_phase(*p);
  if (p->until_change > 0) --p->until_change;

  if (rng_.chance(c_.ordering_violation_rate)) {
    // Store address waits on a miss; the younger load to the same bytes
    // runs ahead of it.
    DynPc& f = dyn_[rng_.below(dyn_.size())];
    ensure_written(f.reg, f.instances ? f.last_index + 1 : 0);
    const RegId tmp = general_reg();
    const std::uint64_t faddr = kFarBase + rng_.below(kFarLines) * kLineBytes + 8 * rng_.below(8);
    f.last_index = idx_;
    f.last_addr = faddr;
    ++f.instances;
    emit(TraceRecord::load(0, f.pc, tmp, SourceRegs{f.reg}, faddr, 8, mem_.read(faddr, 8)));
    ++nonstable_emitted_;
    std::uint64_t v = mem_.read(p->addr, p->size);
    if (!rng_.chance(c_.silent_store_rate)) v = (v + 1 + (rng_.bits() & 0xff)) & size_mask(p->size);
    mem_.write(p->addr, p->size, v);
    emit(TraceRecord::store(0, other_pc(), SourceRegs{tmp}, p->addr, p->size, v));
  }
  emit(TraceRecord::load(0, p->pc, general_reg(), p->src, p->addr, p->size, mem_.read(p->addr, p->size)));
  ++p->instances;
  ++nonstable_emitted_;
}

void Generator::emit_dyn_load(bool far) {
  DynPc* d = nullptr;
  for (auto& q : dyn_)
    if (q.instances == 1) d = &q;
  if (!d) d = &dyn_[rng_.below(dyn_.size())];
  std::uint64_t addr;
  std::uint8_t size = 8;
  do {
    if (far) {
      addr = kFarBase + rng_.below(kFarLines) * kLineBytes + 8 * rng_.below(8);
    } else if (rng_.chance(0.3)) {
      size = 4;
      addr = kDynBase + 4 * rng_.below(kDynBytes / 4);
    } else {
      addr = kDynBase + 8 * rng_.below(kDynBytes / 8);
    }
  } while (d->instances > 0 && addr == d->last_addr);
  if (d->instances > 0) ensure_written(d->reg, d->last_index + 1);
  d->last_index = idx_;
  d->last_addr = addr;
  ++d->instances;
  emit(TraceRecord::load(0, d->pc, general_reg(), SourceRegs{d->reg}, addr, size, mem_.read(addr, size)));
  ++nonstable_emitted_;
}

void Generator::emit_nonstable_load() {
  if (rng_.chance(c_.phase_load_fraction))
    emit_phase_load();
  else
    emit_dyn_load(rng_.chance(c_.far_load_fraction));
}

void Generator::emit_store() {
  const bool silent = rng_.chance(c_.silent_store_rate);
  std::uint64_t addr;
  std::uint8_t size = 8;
  const std::size_t targets = live_stable_.size() + phase_.size();
  if (targets > 0 && rng_.chance(c_.store_interference_rate)) {
    const std::size_t k = rng_.below(targets);
    if (k < live_stable_.size()) {
      const StablePc& p = stable_[live_stable_[k]];
      // A global-stable value may only ever be rewritten silently; a
      // non-silent store lands on the unread half of its 16-byte slot.
      if (silent) {
        addr = p.addr;
        size = p.size;
      } else {
        addr = p.addr + 8;
      }
    } else {
      const PhasePc& p = phase_[k - live_stable_.size()];
      addr = p.addr;
      size = p.size;
    }
  } else if (rng_.chance(0.3)) {
    size = 4;
    addr = kDynBase + 4 * rng_.below(kDynBytes / 4);
  } else {
    addr = kDynBase + 8 * rng_.below(kDynBytes / 8);
  }
  std::uint64_t v = mem_.read(addr, size);
  if (!silent) v = (v + 1 + (rng_.bits() & 0xffff)) & size_mask(size);
  mem_.write(addr, size, v);
  emit(TraceRecord::store(0, other_pc(), general_srcs(), addr, size, v));
}

void Generator::emit_alu() {
  if (rng_.chance(c_.register_overwrite_rate)) {
    if (!phase_.empty() && rng_.chance(0.5)) {
      PhasePc& p = phase_[rng_.below(phase_.size())];
      if (p.instances > 0) {
        move_phase(p);
        return;
      }
    }
    // Address-preserving write to a stable-load base register.
    static constexpr RegId kBases[] = {kRsp, kRbp, 0, 1};
    const RegId r = kBases[rng_.below(4)];
    emit(TraceRecord::alu(0, other_pc(), r, SourceRegs{r}));
    return;
  }
  emit(TraceRecord::alu(0, other_pc(), general_reg(), general_srcs()));
}

void Generator::emit_filler() {
  const double rest = c_.store_fraction + c_.branch_fraction + (1.0 - c_.load_fraction - c_.store_fraction - c_.branch_fraction);
  const double u = rng_.u01() * (rest > 0 ? rest : 1.0);
  if (u < c_.store_fraction)
    emit_store();
  else if (u < c_.store_fraction + c_.branch_fraction)
    emit(TraceRecord::branch(0, other_pc(), SourceRegs{general_reg()}));
  else
    emit_alu();
}

Trace Generator::run() {
  const double f = c_.stable_load_fraction;
  const double stable_rate = f * c_.load_fraction;
  for (std::size_t i = 0; i < kDynPool; ++i)
    dyn_.push_back({kDynPcBase + 4 * i, static_cast<RegId>(kGeneralLo + i % (16 - kGeneralLo)), 0, 0, 0});

  while (idx_ < c_.n_instructions) {
    if (rng_.chance(c_.context_switch_rate)) emit(TraceRecord::context_switch(0));
    if (rng_.chance(c_.snoop_rate)) {
      std::uint64_t line;
      const std::size_t targets = live_stable_.size() + phase_.size();
      if (targets > 0 && rng_.chance(0.7)) {
        const std::size_t k = rng_.below(targets);
        line = line_of(k < live_stable_.size() ? stable_[live_stable_[k]].addr : phase_[k - live_stable_.size()].addr);
      } else {
        line = line_of(kDynBase + rng_.below(kDynBytes));
      }
      emit(TraceRecord::snoop(0, line));
    }
    if (!due_.empty() && due_.top().first <= idx_) {
      const std::size_t id = due_.top().second;
      due_.pop();
      emit_stable(id);
      continue;
    }
    if (stable_rate > 0 && static_cast<double>(stable_emitted_) < stable_rate * static_cast<double>(idx_ + 1)) {
      spawn_stable();
      continue;
    }
    const double want_ns = f > 0 ? static_cast<double>(stable_emitted_) * (1 - f) / f
                                 : c_.load_fraction * static_cast<double>(idx_ + 1);
    if (f < 1 && static_cast<double>(nonstable_emitted_) + 1 <= want_ns) {
      emit_nonstable_load();
      continue;
    }
    emit_filler();
  }
  return std::move(t_);
}

} // namespace

void GenConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0 && v <= 1)) throw InfeasibleConfig(std::string(name) + " must be in [0,1]");
  };
  auto group = [](const std::array<double, 3>& w, const char* name) {
    double sum = 0;
    for (double x : w) {
      if (!(x >= 0)) throw InfeasibleConfig(std::string(name) + " weights must be nonnegative");
      sum += x;
    }
    if (std::fabs(sum - 1.0) > 1e-6) throw InfeasibleConfig(std::string(name) + " weights must sum to 1");
  };
  unit(stable_load_fraction, "stable_load_fraction");
  group(addressing_mode_mix, "addressing_mode_mix");
  group(inter_occurrence_profile, "inter_occurrence_profile");
  unit(store_interference_rate, "store_interference_rate");
  unit(silent_store_rate, "silent_store_rate");
  unit(snoop_rate, "snoop_rate");
  unit(register_overwrite_rate, "register_overwrite_rate");
  unit(ordering_violation_rate, "ordering_violation_rate");
  unit(context_switch_rate, "context_switch_rate");
  unit(load_fraction, "load_fraction");
  unit(store_fraction, "store_fraction");
  unit(branch_fraction, "branch_fraction");
  unit(phase_load_fraction, "phase_load_fraction");
  unit(far_load_fraction, "far_load_fraction");
  if (load_fraction + store_fraction + branch_fraction > 1.0 + 1e-9)
    throw InfeasibleConfig("load, store and branch fractions exceed 1");
  if (!(mean_stable_lifetime >= 1) || !(mean_phase_length >= 1))
    throw InfeasibleConfig("mean lifetimes must be >= 1");
  if (n_instructions > 0 && stable_load_fraction > 0) {
    if (load_fraction <= 0) throw InfeasibleConfig("stable loads requested with load_fraction = 0");
    for (std::size_t b = 0; b < 3; ++b)
      if (inter_occurrence_profile[b] > 0 && kBinLo[b] >= n_instructions)
        throw InfeasibleConfig("inter_occurrence_profile needs distances of at least " +
                               std::to_string(kBinLo[b]) + " instructions but n_instructions is " +
                               std::to_string(n_instructions));
  }
}

Trace generate(const GenConfig& config) {
  config.validate();
  Generator g(config);
  return g.run();
}

} // namespace constable
