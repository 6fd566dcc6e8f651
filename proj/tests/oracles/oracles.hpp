#pragma once

// Reference models written independently of the simulator: plain containers,
// no shared helpers beyond the trace types.

#include <cstdint>
#include <deque>
#include <list>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "constable/engine.hpp"
#include "constable/inspector.hpp"
#include "constable/trace.hpp"

namespace oracle {

using namespace constable;

/// seq_no -> value every load must observe, from a byte map replay.
std::map<std::uint64_t, std::uint64_t> expected_load_values(const Trace& t);

/// One set-associative cache with true LRU, as lists of line addresses.
class LruCache {
public:
  LruCache(std::uint64_t size_bytes, std::uint32_t ways);
  /// Returns true on hit. On a miss the line is filled; a victim goes to *evicted.
  bool access(std::uint64_t line, std::optional<std::uint64_t>* evicted = nullptr);
  bool contains(std::uint64_t line) const;
  void invalidate(std::uint64_t line);

private:
  std::list<std::uint64_t>& set_of(std::uint64_t line);
  std::uint32_t ways_;
  std::vector<std::list<std::uint64_t>> sets_; // front = most recent
};

/// Brute-force two-pass inspector.
InspectorReport reference_analyze(const Trace& t);

enum class Decision { Normal, Mark, Eliminate };

/// Sequential Constable: each load is looked up, executed and written back
/// before the next record. Valid for traces whose loads never overlap in
/// flight, like the spaced scenarios.
class StepThrough {
public:
  explicit StepThrough(const ConstableConfig& cfg = {});
  void feed(const TraceRecord& r);
  void run(const Trace& t) {
    for (const auto& r : t.records) feed(r);
  }

  std::vector<Decision> decisions;     // one per load, trace order
  std::vector<std::uint64_t> load_seq; // matching seq_no
  std::uint64_t eliminations = 0;
  std::uint64_t marks = 0;
  std::uint64_t flag_resets = 0;

  std::optional<std::uint32_t> confidence(std::uint64_t pc) const;
  bool flag(std::uint64_t pc) const;

private:
  struct Entry {
    std::uint32_t conf = 0;
    bool has_last = false;
    std::uint64_t addr = 0, value = 0;
    std::uint8_t size = 0;
    bool flag = false;
    bool pending = false;
  };
  struct Watch {
    std::uint64_t key = 0;
    std::uint8_t key_size = 0;
    std::deque<std::uint32_t> pcs;
  };

  std::uint32_t key(std::uint64_t pc) const;
  Entry* find(std::uint32_t k);
  void reset(std::uint32_t k);
  void watch_register(RegId r, std::uint32_t k);
  void watch_address(std::uint64_t addr, std::uint8_t size, std::uint32_t k);
  void kill(std::list<Watch>& set, std::list<Watch>::iterator it);
  void load(const TraceRecord& r);

  ConstableConfig cfg_;
  std::vector<std::list<std::uint32_t>> sld_lru_; // per set, front = most recent
  std::unordered_map<std::uint32_t, Entry> sld_;
  std::vector<std::deque<std::uint32_t>> rmt_;
  std::vector<std::list<Watch>> amt_; // per set, front = most recent
};

} // namespace oracle
