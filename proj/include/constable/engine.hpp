#pragma once

#include <cstdint>
#include <vector>

#include "constable/memsys.hpp"
#include "constable/trace.hpp"

namespace constable {

struct EngineStats;

enum class RenameDecision : std::uint8_t { Normal, MarkLikelyStable, Eliminate };

struct LookupResult {
  RenameDecision decision = RenameDecision::Normal;
  std::uint64_t value = 0; // Eliminate only
  std::uint64_t addr = 0;
  std::uint8_t size = 0;
};

struct WritebackResult {
  bool pin_requested = false;
};

/// What the pipeline sees of an elimination mechanism. Every call is made
/// synchronously from a pipeline stage; within one cycle the order is rename
/// lookups and register writes, then store/snoop resolutions, then writebacks.
class EliminationEngine : public MemsysListener {
public:
  /// True iff lookup_at_rename would return Eliminate right now.
  virtual bool would_eliminate(std::uint64_t pc) const = 0;
  /// `uid` is unique per rename event (replays after a flush get new uids).
  virtual LookupResult lookup_at_rename(std::uint64_t pc, const SourceRegs& src, std::uint64_t uid) = 0;
  /// Detaches the monitor list for `reg`; each returned id costs one SLD
  /// write via apply_register_reset().
  virtual std::vector<std::uint32_t> take_register_monitor(RegId reg) = 0;
  virtual void apply_register_reset(std::uint32_t pc_hash) = 0;
  virtual WritebackResult on_writeback(std::uint64_t pc, const SourceRegs& src, std::uint64_t paddr,
                                       std::uint8_t size, std::uint64_t value, bool marked_likely_stable,
                                       std::uint64_t uid) = 0;
  virtual void on_store_resolved(std::uint64_t paddr, std::uint8_t size) = 0;
  virtual void on_context_switch() = 0;
  /// The eliminated move owning an xPRF slot retired or was squashed.
  virtual void release_xprf(std::uint64_t uid) = 0;
  /// False for engines that never touch the SLD, so rename skips port budgeting.
  virtual bool uses_rename_ports() const { return true; }
  virtual const EngineStats* stats_view() const { return nullptr; }
  virtual std::uint32_t sld_read_ports() const { return 3; }
  virtual std::uint32_t sld_write_ports() const { return 2; }
};

/// Baseline: never eliminates, keeps no state.
class NoopEngine final : public EliminationEngine {
public:
  bool would_eliminate(std::uint64_t) const override { return false; }
  LookupResult lookup_at_rename(std::uint64_t, const SourceRegs&, std::uint64_t) override { return {}; }
  std::vector<std::uint32_t> take_register_monitor(RegId) override { return {}; }
  void apply_register_reset(std::uint32_t) override {}
  WritebackResult on_writeback(std::uint64_t, const SourceRegs&, std::uint64_t, std::uint8_t, std::uint64_t,
                               bool, std::uint64_t) override {
    return {};
  }
  void on_store_resolved(std::uint64_t, std::uint8_t) override {}
  void on_context_switch() override {}
  void release_xprf(std::uint64_t) override {}
  void on_snoop(std::uint64_t) override {}
  void on_l1_eviction(std::uint64_t) override {}
  bool uses_rename_ports() const override { return false; }
};

enum class AmtIndex : std::uint8_t { Cacheline, FullAddress };

struct ConstableConfig {
  std::uint32_t sld_sets = 32;
  std::uint32_t sld_ways = 16;
  std::uint32_t confidence_bits = 5;
  std::uint32_t threshold = 30;
  std::uint32_t rmt_stack_capacity = 16; // RSP and RBP
  std::uint32_t rmt_other_capacity = 8;  // the other 14 GPRs
  std::uint32_t amt_sets = 32;
  std::uint32_t amt_ways = 8;
  std::uint32_t amt_pcs_per_entry = 4;
  std::uint32_t xprf_size = 32;
  std::uint32_t sld_read_ports = 3;
  std::uint32_t sld_write_ports = 2;
  AmtIndex amt_index = AmtIndex::Cacheline;
  /// Constable-AMT-I: no CV pinning, AMT entries die on every L1-D eviction.
  bool amt_i_mode = false;
  bool context_switch_clears_confidence = false;
  /// Fault injection for verification tests only: ignore store addresses.
  bool disable_store_invalidation = false;

  std::uint32_t max_confidence() const { return (1u << confidence_bits) - 1; }
  void validate() const;
};

std::uint32_t hash_pc(std::uint64_t pc);

struct EngineStats {
  std::uint64_t sld_reads = 0;
  std::uint64_t sld_writes = 0;
  std::uint64_t rmt_reads = 0;
  std::uint64_t rmt_writes = 0;
  std::uint64_t amt_reads = 0;
  std::uint64_t amt_writes = 0;
  std::uint64_t rmt_inserts = 0;
  std::uint64_t amt_inserts = 0;
  std::uint64_t amt_evictions_store = 0;
  std::uint64_t amt_evictions_snoop = 0;
  std::uint64_t amt_evictions_capacity = 0;
  std::uint64_t amt_evictions_amt_i = 0;
  std::uint64_t flag_resets_register = 0;
  std::uint64_t flag_resets_store = 0;
  std::uint64_t flag_resets_snoop = 0;
  std::uint64_t flag_resets_capacity = 0;
  std::uint64_t flag_resets_context = 0;
  std::uint64_t flag_resets_amt_i = 0;
  std::uint64_t flag_resets_displacement = 0;
  std::uint64_t flag_resets_mismatch = 0;
  std::uint64_t flags_set = 0;
  std::uint64_t likely_stable_marks = 0;
  std::uint64_t eliminations = 0; // rename-time decisions, replays included
  std::uint64_t xprf_full_rejections = 0;
  std::uint64_t sld_allocations = 0;
  std::uint64_t sld_evictions = 0;
  std::uint64_t sld_collisions = 0;
  std::uint64_t rmt_displacements = 0;
  std::uint64_t amt_displacements = 0;
};

/// Read-only view of one SLD entry, for tests and tracing.
struct SldView {
  bool present = false;
  std::uint32_t confidence = 0;
  bool can_eliminate = false;
  std::uint64_t last_addr = 0;
  std::uint64_t last_value = 0;
};

class ConstableEngine final : public EliminationEngine {
public:
  explicit ConstableEngine(const ConstableConfig& cfg = {});

  bool would_eliminate(std::uint64_t pc) const override;
  LookupResult lookup_at_rename(std::uint64_t pc, const SourceRegs& src, std::uint64_t uid) override;
  std::vector<std::uint32_t> take_register_monitor(RegId reg) override;
  void apply_register_reset(std::uint32_t pc_hash) override;
  WritebackResult on_writeback(std::uint64_t pc, const SourceRegs& src, std::uint64_t paddr, std::uint8_t size,
                               std::uint64_t value, bool marked_likely_stable, std::uint64_t uid) override;
  void on_store_resolved(std::uint64_t paddr, std::uint8_t size) override;
  void on_context_switch() override;
  void release_xprf(std::uint64_t uid) override;
  void on_snoop(std::uint64_t line) override;
  void on_l1_eviction(std::uint64_t line) override { on_amt_invalidate(line); }
  const EngineStats* stats_view() const override { return &stats_; }
  std::uint32_t sld_read_ports() const override { return cfg_.sld_read_ports; }
  std::uint32_t sld_write_ports() const override { return cfg_.sld_write_ports; }

  void on_amt_invalidate(std::uint64_t line);

  /// Convenience for callers without a port budget: detach and apply.
  std::size_t on_dest_register_write(RegId reg);

  const ConstableConfig& config() const { return cfg_; }
  const EngineStats& stats() const { return stats_; }
  SldView sld(std::uint64_t pc) const;
  std::vector<std::uint32_t> rmt_list(RegId reg) const;
  std::vector<std::uint32_t> amt_list(std::uint64_t paddr) const;
  std::uint32_t xprf_free() const { return cfg_.xprf_size - static_cast<std::uint32_t>(xprf_owners_.size()); }

private:
  enum class ResetCause { Register, Store, Snoop, Capacity, Context, AmtI, Displacement, Mismatch };

  struct SldEntry {
    bool valid = false;
    std::uint32_t tag = 0;
    std::uint64_t pc = 0; // full PC, kept only to count tag collisions
    bool has_last = false;
    std::uint64_t last_addr = 0;
    std::uint64_t last_value = 0;
    std::uint8_t last_size = 0;
    std::uint32_t confidence = 0;
    bool can_eliminate = false;
    // A MarkLikelyStable rename reserved monitoring; any reset withdraws it.
    bool pending = false;
    std::uint64_t pending_uid = 0;
    std::uint64_t lru = 0;
  };

  struct AmtEntry {
    bool valid = false;
    std::uint64_t key = 0; // line address, or load address in full-address mode
    std::uint8_t key_size = 0;
    std::vector<std::uint32_t> pcs; // FIFO, oldest first
    std::uint64_t lru = 0;
  };

  SldEntry* sld_find(std::uint32_t hash);
  const SldEntry* sld_find(std::uint32_t hash) const;
  SldEntry& sld_allocate(std::uint32_t hash, std::uint64_t pc);
  void reset_pc(std::uint32_t hash, ResetCause cause);
  void monitor(std::uint32_t hash, const SourceRegs& src, std::uint64_t addr, std::uint8_t size);
  void rmt_insert(RegId reg, std::uint32_t hash);
  void amt_insert(std::uint64_t addr, std::uint8_t size, std::uint32_t hash);
  void amt_kill(AmtEntry& e, ResetCause cause);
  std::uint32_t amt_set(std::uint64_t addr) const;
  std::uint32_t rmt_capacity(RegId reg) const;

  ConstableConfig cfg_;
  std::vector<SldEntry> sld_;
  std::vector<std::vector<std::uint32_t>> rmt_;
  std::vector<AmtEntry> amt_;
  std::vector<std::uint64_t> xprf_owners_;
  std::uint64_t clock_ = 0;
  EngineStats stats_;
};

} // namespace constable
