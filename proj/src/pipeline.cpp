#include "constable/pipeline.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <queue>
#include <set>
#include <tuple>
#include <unordered_map>

#include "constable/functional.hpp"
#include "constable/memory_image.hpp"

namespace constable {

void CoreConfig::validate() const {
  const std::uint32_t sizes[] = {rename_width, retire_width, rob_size,  lb_size,   sb_size,
                                 rs_size,      alu_ports,    agu_ports, load_ports, sta_ports,
                                 std_ports,    load_width_multiplier};
  for (auto v : sizes)
    if (v == 0) throw std::invalid_argument("core widths, sizes and port counts must be >= 1");
  if (deadlock_cycles == 0) throw std::invalid_argument("deadlock_cycles must be >= 1");
}

const char* ideal_mode_name(IdealMode m) {
  switch (m) {
  case IdealMode::None: return "baseline";
  case IdealMode::IdealConstable: return "ideal-constable";
  case IdealMode::IdealStableLVP: return "ideal-lvp";
  case IdealMode::IdealStableLVP_DFE: return "ideal-lvp-dfe";
  case IdealMode::TwoXLoadWidth: return "2x-load";
  }
  return "?";
}

static std::string mismatch_text(std::uint64_t seq, std::uint64_t ea, std::uint64_t ev, std::uint64_t ga,
                                 std::uint64_t gv) {
  return "golden check mismatch at seq " + std::to_string(seq) + ": expected addr 0x" + hex(ea) + " value 0x" +
         hex(ev) + ", got addr 0x" + hex(ga) + " value 0x" + hex(gv);
}

GoldenCheckMismatch::GoldenCheckMismatch(std::uint64_t seq, std::uint64_t ea, std::uint64_t ev, std::uint64_t ga,
                                         std::uint64_t gv)
    : std::runtime_error(mismatch_text(seq, ea, ev, ga, gv)), seq_no(seq), expected_addr(ea), expected_value(ev),
      got_addr(ga), got_value(gv) {}

StructuralDeadlock::StructuralDeadlock(std::uint64_t c, std::uint64_t head_seq)
    : std::runtime_error("no retirement progress by cycle " + std::to_string(c) + " (ROB head seq " +
                         std::to_string(head_seq) + ")"),
      cycle(c), rob_head_seq(head_seq) {}

namespace {

constexpr std::uint64_t kInf = UINT64_MAX;
constexpr std::uint64_t kNone = UINT64_MAX;

struct Ref {
  std::uint64_t pos;
  std::uint64_t uid;
};

struct Uop {
  std::uint64_t uid = 0;
  std::uint64_t pos = 0;
  std::size_t rec = 0;
  const TraceRecord* r = nullptr;
  std::uint64_t rename_cycle = 0;
  std::uint64_t src_ready = 0;
  std::uint8_t unknown_srcs = 0;
  std::uint64_t value_ready = kInf; // dependents may issue from this cycle on
  std::uint64_t complete = kInf;    // may retire from this cycle on
  std::vector<Ref> consumers;
  bool in_rs = false;
  bool eliminated = false;       // Constable or IdealConstable, completed at rename
  bool ideal = false;            // eliminated by the oracle, exempt from disambiguation
  bool marked = false;
  bool stable = false;           // PC is in RunOptions::stable_pcs
  bool data_obtained = false;
  bool resolved = false;         // stores
  std::uint64_t agu_cycle = 0;
  std::uint64_t addr = 0;  // address the delivered value belongs to
  std::uint64_t value = 0; // value delivered to dependents / checked at retire
};

using Timed = std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>; // cycle, pos, uid
using MinHeap = std::priority_queue<Timed, std::vector<Timed>, std::greater<Timed>>;

struct MirrorWrite {
  std::uint64_t seq;
  std::uint64_t line;
};

class Core {
public:
  Core(const Trace& t, const CoreConfig& c, EliminationEngine& e, Memsys& m, const RunOptions& o)
      : trace_(t), cfg_(c), engine_(e), mem_(m), opt_(o), slots_(c.rob_size) {
    cfg_.validate();
    map_.fill(kNone);
    for (const auto& chunk : trace_.init) committed_.apply(chunk);
    functional_ = replay_functional(trace_);
    if (opt_.mirror)
      for (const auto& r : opt_.mirror->records)
        if (r.is_store()) mirror_.push_back({r.seq_no, line_of(r.mem_paddr)});
    const std::uint32_t mult = opt_.mode == IdealMode::TwoXLoadWidth ? 2 * cfg_.load_width_multiplier
                                                                      : cfg_.load_width_multiplier;
    agu_width_ = cfg_.agu_ports * mult;
    load_width_ = cfg_.load_ports * mult;
    s_.alu_ports.busy_cycles.assign(cfg_.alu_ports, 0);
    s_.agu_ports.busy_cycles.assign(agu_width_, 0);
    s_.load_ports.busy_cycles.assign(load_width_, 0);
    s_.sta_ports.busy_cycles.assign(cfg_.sta_ports, 0);
    s_.std_ports.busy_cycles.assign(cfg_.std_ports, 0);
    budget_ports_ = engine_.uses_rename_ports();
  }

  SimStats run();

private:
  Uop& slot(std::uint64_t pos) { return slots_[pos % slots_.size()]; }
  bool valid(std::uint64_t pos, std::uint64_t uid) {
    return pos >= head_ && pos < tail_ && slot(pos).uid == uid;
  }
  bool is_stable(std::uint64_t pc) const { return opt_.stable_pcs && opt_.stable_pcs->count(pc); }

  void rename();
  void deliver_side_record(const TraceRecord& r);
  void resolve_stores();
  void flush(std::uint64_t from_pos);
  void writeback();
  void load_ports();
  bool execute_load(Uop& l);
  void issue();
  void retire();
  void set_value_ready(Uop& u, std::uint64_t cycle);
  void push_pending(Uop& u);
  std::uint64_t next_event() const;

  const Trace& trace_;
  CoreConfig cfg_;
  EliminationEngine& engine_;
  Memsys& mem_;
  RunOptions opt_;
  FunctionalState functional_;
  MemoryImage committed_;
  std::vector<MirrorWrite> mirror_;
  std::size_t mirror_next_ = 0;

  std::vector<Uop> slots_;
  std::uint64_t head_ = 0, tail_ = 0;
  std::uint64_t next_uid_ = 1;
  std::size_t cursor_ = 0;
  std::uint64_t side_delivered_ = 0; // highest N/X seq already delivered
  bool side_any_ = false;
  std::array<std::uint64_t, kNumArchRegs> map_{};

  std::deque<std::uint64_t> lb_, sb_;
  std::uint32_t rs_count_ = 0;
  std::vector<std::uint32_t> backlog_;
  std::size_t backlog_head_ = 0;

  MinHeap pending_;  // sources known, waiting for their ready cycle
  MinHeap resolve_;  // store address resolution
  MinHeap wb_;       // load data return
  std::set<std::uint64_t> ready_;    // may issue now, by age
  std::set<std::uint64_t> port_q_;   // loads past AGU waiting for a load port
  std::unordered_map<std::uint64_t, std::vector<Ref>> store_waiters_; // store uid -> loads

  std::uint32_t agu_width_ = 0, load_width_ = 0;
  bool budget_ports_ = true;
  bool rename_blocked_ = false;
  std::uint64_t now_ = 0;
  std::uint64_t last_retire_ = 0;
  SimStats s_;
};

void Core::set_value_ready(Uop& u, std::uint64_t cycle) {
  u.value_ready = cycle;
  for (const Ref& c : u.consumers) {
    if (!valid(c.pos, c.uid)) continue;
    Uop& d = slot(c.pos);
    d.src_ready = std::max(d.src_ready, cycle);
    if (--d.unknown_srcs == 0) push_pending(d);
  }
  u.consumers.clear();
}

void Core::push_pending(Uop& u) { pending_.emplace(std::max(u.src_ready, u.rename_cycle + 1), u.pos, u.uid); }

void Core::deliver_side_record(const TraceRecord& r) {
  if (side_any_ && r.seq_no <= side_delivered_) return; // already seen before a replay
  side_any_ = true;
  side_delivered_ = r.seq_no;
  if (r.kind == RecordKind::Snoop) {
    ++s_.snoop_records;
    mem_.remote_write(r.snoop_paddr, now_);
  } else {
    ++s_.context_switches;
    engine_.on_context_switch();
    mem_.clear_all_pins(Memsys::kOwnCore);
  }
}

void Core::rename() {
  rename_blocked_ = false;
  const std::uint32_t read_budget = budget_ports_ ? engine_.sld_read_ports() : UINT32_MAX;
  const std::uint32_t write_budget = budget_ports_ ? engine_.sld_write_ports() : UINT32_MAX;
  std::uint32_t reads = 0, writes = 0, slots = 0;

  // Resets owed by an earlier group go first; younger uops wait behind them.
  while (backlog_head_ < backlog_.size() && writes < write_budget) {
    engine_.apply_register_reset(backlog_[backlog_head_++]);
    ++writes;
  }
  if (backlog_head_ < backlog_.size()) {
    ++s_.rename_stall_sld_write;
    return;
  }
  backlog_.clear();
  backlog_head_ = 0;

  const auto& recs = trace_.records;
  while (slots < cfg_.rename_width && cursor_ < recs.size()) {
    const TraceRecord& r = recs[cursor_];
    while (mirror_next_ < mirror_.size() && mirror_[mirror_next_].seq <= r.seq_no)
      mem_.remote_write(mirror_[mirror_next_++].line, now_);
    if (!r.is_instruction()) {
      deliver_side_record(r);
      ++cursor_;
      continue;
    }
    const bool is_load = r.is_load(), is_store = r.is_store();
    if (tail_ - head_ >= cfg_.rob_size || (is_load && lb_.size() >= cfg_.lb_size) ||
        (is_store && sb_.size() >= cfg_.sb_size)) {
      rename_blocked_ = true;
      break;
    }
    const bool stable = is_load && is_stable(r.pc);
    const bool ideal_elim = stable && opt_.mode == IdealMode::IdealConstable;
    const std::uint64_t uid = next_uid_;
    LookupResult d;
    if (is_load && !ideal_elim) {
      if (budget_ports_ && reads >= read_budget) {
        ++s_.rename_stall_sld_read;
        break;
      }
      if (!engine_.would_eliminate(r.pc) && rs_count_ >= cfg_.rs_size) {
        rename_blocked_ = true;
        break;
      }
      ++reads;
      d = engine_.lookup_at_rename(r.pc, r.src, uid);
    } else if (!ideal_elim && rs_count_ >= cfg_.rs_size) {
      rename_blocked_ = true;
      break;
    }

    Uop& u = slot(tail_);
    u = Uop{};
    u.uid = uid;
    u.pos = tail_++;
    ++next_uid_;
    u.rec = cursor_;
    u.r = &r;
    u.rename_cycle = now_;
    u.stable = stable;
    ++s_.renamed_uops;

    if (ideal_elim || d.decision == RenameDecision::Eliminate) {
      u.eliminated = true;
      u.ideal = ideal_elim;
      u.addr = ideal_elim ? r.mem_paddr : d.addr;
      u.value = ideal_elim ? r.mem_value : d.value;
      u.complete = now_;
      u.value_ready = now_;
      ++s_.eliminations_at_rename;
    } else {
      u.in_rs = true;
      ++rs_count_;
      ++s_.rs_allocations;
      u.marked = d.decision == RenameDecision::MarkLikelyStable;
      for (RegId src : r.src) {
        if (src == kRip) continue;
        const std::uint64_t p = map_[src];
        if (p == kNone) continue;
        Uop& prod = slot(p);
        if (prod.value_ready != kInf) {
          u.src_ready = std::max(u.src_ready, prod.value_ready);
        } else {
          prod.consumers.push_back({u.pos, u.uid});
          ++u.unknown_srcs;
        }
      }
      if (stable && (opt_.mode == IdealMode::IdealStableLVP || opt_.mode == IdealMode::IdealStableLVP_DFE))
        u.value_ready = now_; // oracle value handed to dependents
      if (u.unknown_srcs == 0) push_pending(u);
    }
    if (is_load) lb_.push_back(u.pos);
    if (is_store) sb_.push_back(u.pos);

    if (r.has_dst()) {
      map_[r.dst] = u.pos;
      for (auto h : engine_.take_register_monitor(r.dst)) {
        if (writes < write_budget) {
          engine_.apply_register_reset(h);
          ++writes;
        } else {
          backlog_.push_back(h);
        }
      }
    }
    ++cursor_;
    ++slots;
    if (!backlog_.empty()) {
      ++s_.rename_stall_sld_write;
      break;
    }
  }
  if (cursor_ >= recs.size()) rename_blocked_ = true;
}

void Core::resolve_stores() {
  while (!resolve_.empty() && std::get<0>(resolve_.top()) <= now_) {
    const auto [cycle, pos, uid] = resolve_.top();
    resolve_.pop();
    if (!valid(pos, uid)) continue;
    Uop& st = slot(pos);
    st.resolved = true;
    const TraceRecord& r = *st.r;
    engine_.on_store_resolved(r.mem_paddr, r.mem_size);
    const std::uint64_t line = line_of(r.mem_paddr);
    auto it = std::upper_bound(lb_.begin(), lb_.end(), pos);
    for (; it != lb_.end(); ++it) {
      const Uop& l = slot(*it);
      if (l.ideal || !(l.data_obtained || l.eliminated)) continue;
      if (line_of(l.addr) == line) {
        flush(l.pos);
        break;
      }
    }
  }
}

void Core::flush(std::uint64_t from) {
  ++s_.ordering_violation_flushes;
  cursor_ = slot(from).rec;
  std::array<bool, kNumArchRegs> undone{};
  for (std::uint64_t p = from; p < tail_; ++p) {
    Uop& u = slot(p);
    ++s_.squashed_uops;
    if (u.eliminated && !u.ideal) {
      engine_.release_xprf(u.uid);
      ++s_.squashed_eliminations;
    }
    // Younger loads may have learned this store's value by forwarding; memory
    // will never hold it, so the address is invalidated again.
    if (u.resolved && u.r->is_store()) engine_.on_store_resolved(u.r->mem_paddr, u.r->mem_size);
    // Same for registers: the squashed write is undone.
    if (u.r->has_dst() && u.r->dst < kNumArchRegs) undone[u.r->dst] = true;
    if (u.in_rs) --rs_count_;
    u.uid = 0;
  }
  for (RegId reg = 0; reg < kNumArchRegs; ++reg)
    if (undone[reg])
      for (auto h : engine_.take_register_monitor(reg)) engine_.apply_register_reset(h);
  tail_ = from;
  while (!lb_.empty() && lb_.back() >= from) lb_.pop_back();
  while (!sb_.empty() && sb_.back() >= from) sb_.pop_back();
  ready_.erase(ready_.lower_bound(from), ready_.end());
  port_q_.erase(port_q_.lower_bound(from), port_q_.end());
  map_.fill(kNone);
  for (std::uint64_t p = head_; p < tail_; ++p) {
    const Uop& u = slot(p);
    if (u.r->has_dst()) map_[u.r->dst] = p;
  }
}

void Core::writeback() {
  while (!wb_.empty() && std::get<0>(wb_.top()) <= now_) {
    const auto [cycle, pos, uid] = wb_.top();
    wb_.pop();
    if (!valid(pos, uid)) continue;
    Uop& l = slot(pos);
    const TraceRecord& r = *l.r;
    const WritebackResult res =
        engine_.on_writeback(r.pc, r.src, l.addr, r.mem_size, l.value, l.marked, l.uid);
    if (res.pin_requested) mem_.pin_cv(Memsys::kOwnCore, line_of(l.addr));
  }
}

bool Core::execute_load(Uop& l) {
  const TraceRecord& r = *l.r;
  const std::uint64_t lo = r.mem_paddr, hi = r.mem_paddr + r.mem_size;
  // Youngest older store that has resolved and overlaps; unresolved ones are
  // speculated past.
  auto it = std::lower_bound(sb_.begin(), sb_.end(), l.pos);
  while (it != sb_.begin()) {
    --it;
    Uop& st = slot(*it);
    if (!st.resolved) continue;
    const TraceRecord& sr = *st.r;
    const std::uint64_t slo = sr.mem_paddr, shi = sr.mem_paddr + sr.mem_size;
    if (shi <= lo || hi <= slo) continue;
    if (slo <= lo && hi <= shi) {
      const unsigned shift = static_cast<unsigned>(lo - slo) * 8;
      std::uint64_t v = shift >= 64 ? 0 : sr.mem_value >> shift;
      if (r.mem_size < 8) v &= (std::uint64_t{1} << (8 * r.mem_size)) - 1;
      l.value = v;
      l.complete = now_ + mem_.config().l1d.latency;
      ++s_.sb_forwards;
      break;
    }
    ++s_.partial_overlap_waits;
    store_waiters_[st.uid].push_back({l.pos, l.uid});
    return false;
  }
  if (l.complete == kInf) {
    l.value = committed_.read(lo, r.mem_size);
    l.complete = mem_.access_load(lo, now_).completion_cycle;
  }
  ++s_.l1d_accesses;
  l.addr = lo;
  l.data_obtained = true;
  if (l.value_ready == kInf) set_value_ready(l, l.complete);
  wb_.emplace(l.complete, l.pos, l.uid);
  return true;
}

void Core::load_ports() {
  std::uint32_t used = 0;
  bool stable_on_port = false;
  for (auto it = port_q_.begin(); it != port_q_.end();) {
    Uop& l = slot(*it);
    if (l.agu_cycle >= now_) {
      ++it;
      continue;
    }
    if (used >= load_width_) {
      ++s_.load_issue_deferrals;
      ++it;
      continue;
    }
    it = port_q_.erase(it);
    if (execute_load(l)) {
      ++used;
      stable_on_port |= l.stable;
    }
  }
  s_.load_ports.uses += used;
  for (std::uint32_t i = 0; i < used; ++i) ++s_.load_ports.busy_cycles[i];
  if (used) {
    ++s_.load_utilized_cycles;
    ++(stable_on_port ? s_.stable_load_on_port_cycles : s_.only_nonstable_cycles);
  }
}

void Core::issue() {
  while (!pending_.empty() && std::get<0>(pending_.top()) <= now_) {
    const auto [cycle, pos, uid] = pending_.top();
    pending_.pop();
    if (valid(pos, uid)) ready_.insert(pos);
  }
  std::uint32_t alu = 0, agu = 0, sta = 0, stdp = 0;
  for (auto it = ready_.begin(); it != ready_.end();) {
    if (alu >= cfg_.alu_ports && agu >= agu_width_ && (sta >= cfg_.sta_ports || stdp >= cfg_.std_ports)) {
      // Everything left loses arbitration; only loads count as deferred.
      for (; it != ready_.end(); ++it)
        if (slot(*it).r->is_load()) ++s_.load_issue_deferrals;
      break;
    }
    Uop& u = slot(*it);
    const TraceRecord& r = *u.r;
    bool issued = false;
    switch (r.op) {
    case OpClass::Load:
      if (agu < agu_width_) {
        ++agu;
        issued = true;
        u.agu_cycle = now_;
        if (u.stable && opt_.mode == IdealMode::IdealStableLVP_DFE) {
          // Data fetch eliminated: the oracle value, no load port, no L1-D.
          u.addr = r.mem_paddr;
          u.value = r.mem_value;
          u.data_obtained = true;
          u.complete = now_ + 1;
          wb_.emplace(u.complete, u.pos, u.uid);
        } else {
          port_q_.insert(u.pos);
        }
      } else {
        ++s_.load_issue_deferrals;
      }
      break;
    case OpClass::Store:
      if (sta < cfg_.sta_ports && stdp < cfg_.std_ports) {
        ++sta;
        ++stdp;
        issued = true;
        const std::uint64_t at = now_ + 1 + cfg_.store_address_delay;
        u.complete = at;
        resolve_.emplace(at, u.pos, u.uid);
      }
      break;
    default:
      if (alu < cfg_.alu_ports) {
        ++alu;
        issued = true;
        u.complete = now_ + 1;
        set_value_ready(u, now_ + 1);
      }
      break;
    }
    if (issued) {
      u.in_rs = false;
      --rs_count_;
      it = ready_.erase(it);
    } else {
      ++it;
    }
  }
  auto account = [](PortClassStats& p, std::uint32_t used) {
    p.uses += used;
    for (std::uint32_t i = 0; i < used && i < p.busy_cycles.size(); ++i) ++p.busy_cycles[i];
  };
  account(s_.alu_ports, alu);
  account(s_.agu_ports, agu);
  account(s_.sta_ports, sta);
  account(s_.std_ports, stdp);
}

void Core::retire() {
  for (std::uint32_t n = 0; n < cfg_.retire_width && head_ < tail_; ++n) {
    Uop& u = slot(head_);
    if (u.complete > now_) break;
    const TraceRecord& r = *u.r;
    if (r.is_load()) {
      const LoadExpectation* exp = functional_.expected(r.seq_no);
      ++s_.golden_checked_loads;
      if (!exp || exp->paddr != u.addr || exp->value != u.value) {
        ++s_.golden_mismatches;
        if (cfg_.golden_check)
          throw GoldenCheckMismatch(r.seq_no, exp ? exp->paddr : 0, exp ? exp->value : 0, u.addr, u.value);
      }
      ++s_.retired_loads;
      if (u.eliminated) {
        ++s_.eliminated_loads;
        if (!u.ideal) engine_.release_xprf(u.uid);
      } else {
        ++s_.l1d_accesses_committed;
      }
      if (opt_.record_retired_loads)
        s_.retired_log.push_back({r.seq_no, u.addr, u.value, u.eliminated, u.marked});
      lb_.pop_front();
    } else if (r.is_store()) {
      committed_.write(r.mem_paddr, r.mem_size, r.mem_value);
      mem_.access_store(r.mem_paddr, now_);
      ++s_.retired_stores;
      sb_.pop_front();
      auto w = store_waiters_.find(u.uid);
      if (w != store_waiters_.end()) {
        for (const Ref& ref : w->second)
          if (valid(ref.pos, ref.uid)) {
            slot(ref.pos).agu_cycle = now_;
            port_q_.insert(ref.pos);
          }
        store_waiters_.erase(w);
      }
    }
    if (!u.eliminated) ++s_.rs_allocations_committed;
    if (r.has_dst() && map_[r.dst] == head_) map_[r.dst] = kNone;
    u.uid = 0;
    ++head_;
    ++s_.retired_instructions;
    last_retire_ = now_;
  }
}

std::uint64_t Core::next_event() const {
  std::uint64_t t = kInf;
  if (!pending_.empty()) t = std::min(t, std::get<0>(pending_.top()));
  if (!resolve_.empty()) t = std::min(t, std::get<0>(resolve_.top()));
  if (!wb_.empty()) t = std::min(t, std::get<0>(wb_.top()));
  if (head_ < tail_) t = std::min(t, slots_[head_ % slots_.size()].complete);
  return t;
}

SimStats Core::run() {
  mem_.set_listener(&engine_);
  struct Unhook {
    Memsys& m;
    ~Unhook() { m.set_listener(nullptr); }
  } unhook{mem_};

  const auto& recs = trace_.records;
  while (cursor_ < recs.size() || head_ < tail_) {
    rename();
    resolve_stores();
    writeback();
    load_ports();
    issue();
    retire();

    if (cursor_ >= recs.size() && head_ == tail_) break;
    if (head_ < tail_ && now_ - last_retire_ > cfg_.deadlock_cycles)
      throw StructuralDeadlock(now_, slot(head_).r->seq_no);
    // Jump over cycles in which no stage can act.
    if (rename_blocked_ && backlog_.empty() && ready_.empty() && port_q_.empty()) {
      const std::uint64_t t = next_event();
      if (t == kInf) {
        if (head_ < tail_) throw StructuralDeadlock(now_, slot(head_).r->seq_no);
      } else if (t > now_ + 1) {
        now_ = std::min(t, last_retire_ + cfg_.deadlock_cycles + 1) - 1;
      }
    }
    ++now_;
  }
  s_.cycles = recs.empty() && head_ == 0 ? 0 : now_ + 1;
  s_.memsys = mem_.stats();
  if (const EngineStats* es = engine_.stats_view()) s_.engine = *es;
  return std::move(s_);
}

} // namespace

SimStats run(const Trace& trace, const CoreConfig& core, EliminationEngine& engine, Memsys& memsys,
             const RunOptions& options) {
  Core c(trace, core, engine, memsys, options);
  return c.run();
}

} // namespace constable
