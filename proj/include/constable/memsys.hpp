#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace constable {

struct CacheLevelConfig {
  std::uint64_t size_bytes = 0;
  std::uint32_t ways = 1;
  std::uint32_t latency = 1;
};

struct CacheConfig {
  CacheLevelConfig l1d{48 * 1024, 12, 5};
  CacheLevelConfig l2{2 * 1024 * 1024, 16, 12};
  std::uint32_t memory_latency = 200;
};

/// Set-associative tag array with true LRU. Tracks line addresses only.
class SetAssocCache {
public:
  SetAssocCache(std::uint64_t size_bytes, std::uint32_t ways);

  std::uint32_t num_sets() const { return sets_; }
  std::uint32_t ways() const { return ways_; }
  std::uint32_t set_index(std::uint64_t line) const;

  bool contains(std::uint64_t line) const;
  /// Hit: promote to MRU and return the way's ready cycle.
  std::optional<std::uint64_t> touch(std::uint64_t line);
  /// Inserts as MRU (line must be absent); returns the evicted line, if any.
  std::optional<std::uint64_t> fill(std::uint64_t line, std::uint64_t ready_cycle);
  bool invalidate(std::uint64_t line);

private:
  struct Way {
    std::uint64_t line = 0;
    std::uint64_t lru = 0; // larger = more recent
    std::uint64_t ready = 0;
    bool valid = false;
  };
  Way* find(std::uint64_t line);
  const Way* find(std::uint64_t line) const;

  std::uint32_t sets_;
  std::uint32_t ways_;
  std::vector<Way> ways_storage_;
  std::uint64_t clock_ = 0;
};

enum class HitLevel : std::uint8_t { L1, L2, Memory };

struct AccessResult {
  std::uint64_t completion_cycle = 0;
  HitLevel level = HitLevel::L1;
};

/// Receives the coherence events the elimination engine cares about.
class MemsysListener {
public:
  virtual ~MemsysListener() = default;
  virtual void on_snoop(std::uint64_t line) = 0;
  virtual void on_l1_eviction(std::uint64_t line) = 0;
};

/// Clean-eviction policy for monitored lines.
enum class EvictionPolicy : std::uint8_t {
  PinCv,         // pin the own core's CV bit; evictions are invisible to the engine
  AmtInvalidate, // no pinning; every L1-D eviction is forwarded to the engine
};

struct DirectoryEntry {
  std::uint8_t cv_bits = 0;
  std::uint8_t pinned_bits = 0;
};

struct MemsysStats {
  std::uint64_t l1d_load_accesses = 0;
  std::uint64_t l1d_store_accesses = 0;
  std::uint64_t l1d_hits = 0;
  std::uint64_t l1d_misses = 0;
  std::uint64_t l2_hits = 0;
  std::uint64_t l2_misses = 0;
  std::uint64_t l1d_evictions = 0;
  std::uint64_t snoops_delivered = 0;
  std::uint64_t snoops_filtered = 0;
  std::uint64_t pins = 0;
};

/// Private L1-D + L2 of core 0 (non-inclusive), fixed-latency memory behind
/// them, and a full-map directory over every line core 0 ever touched.
class Memsys {
public:
  static constexpr unsigned kOwnCore = 0;

  explicit Memsys(const CacheConfig& cfg = {}, EvictionPolicy policy = EvictionPolicy::PinCv);

  void set_listener(MemsysListener* l) { listener_ = l; }
  EvictionPolicy policy() const { return policy_; }

  AccessResult access_load(std::uint64_t paddr, std::uint64_t cycle);
  /// Senior-store write into the hierarchy at commit (write-allocate).
  void access_store(std::uint64_t paddr, std::uint64_t cycle);

  /// No-op under EvictionPolicy::AmtInvalidate.
  void pin_cv(unsigned core, std::uint64_t line);
  /// A remote write to `line`. Delivers a snoop to core 0 iff its CV bit is
  /// set; returns whether it was delivered.
  bool remote_write(std::uint64_t line, std::uint64_t cycle);
  void deliver_snoop(unsigned core, std::uint64_t line, std::uint64_t cycle);
  void clear_all_pins(unsigned core);

  bool l1_contains(std::uint64_t line) const { return l1_.contains(line); }
  bool l2_contains(std::uint64_t line) const { return l2_.contains(line); }
  bool cv_set(unsigned core, std::uint64_t line) const;
  bool pinned(unsigned core, std::uint64_t line) const;

  const MemsysStats& stats() const { return stats_; }
  const CacheConfig& config() const { return cfg_; }

private:
  void on_l1_evicted(std::uint64_t line);
  void on_l2_evicted(std::uint64_t line);
  void mark_held(std::uint64_t line);
  void maybe_drop_cv(std::uint64_t line);

  CacheConfig cfg_;
  EvictionPolicy policy_;
  SetAssocCache l1_;
  SetAssocCache l2_;
  std::unordered_map<std::uint64_t, DirectoryEntry> directory_;
  MemsysListener* listener_ = nullptr;
  MemsysStats stats_;
};

} // namespace constable
