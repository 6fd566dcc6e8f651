#pragma once

// Shared plumbing for the unit and acceptance suites.

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>

#include "constable/engine.hpp"
#include "constable/memsys.hpp"
#include "constable/pipeline.hpp"
#include "constable/trace.hpp"

namespace harness {

using namespace constable;

/// Builds self-consistent traces: load values come from a byte map.
class TraceBuilder {
public:
  void init(std::uint64_t addr, std::uint64_t value);
  std::uint64_t load(std::uint64_t pc, RegId dst, SourceRegs src, std::uint64_t addr, std::uint8_t size = 8);
  std::uint64_t store(std::uint64_t pc, SourceRegs src, std::uint64_t addr, std::uint64_t value, std::uint8_t size = 8);
  std::uint64_t alu(std::uint64_t pc, RegId dst, SourceRegs src);
  /// Independent ALU ops writing registers 13..15.
  void pad(std::uint32_t n = 600);
  void snoop(std::uint64_t addr);
  void context_switch();
  std::uint64_t peek(std::uint64_t addr, std::uint8_t size = 8) const;

  Trace trace;

private:
  std::map<std::uint64_t, std::uint8_t> bytes_;
  std::uint64_t seq_ = 0;
};

CoreConfig checked_core();

SimStats run_baseline(const Trace& t, bool record = false, const std::unordered_set<std::uint64_t>* stable = nullptr,
                      CoreConfig core = checked_core());
SimStats run_constable(const Trace& t, const ConstableConfig& cfg = {}, bool record = false,
                       CoreConfig core = checked_core());
/// Same, keeping the engine for post-run inspection.
SimStats run_constable(const Trace& t, ConstableEngine& engine, bool record = false, CoreConfig core = checked_core());

/// Synthetic trace with hazards dialled up; varies with the seed.
Trace random_trace(std::uint64_t seed, std::uint64_t n);
/// Small-table engine geometry with a low threshold.
ConstableConfig stress_config(std::uint64_t seed);

/// Random hazard mix where every event is followed by 600 independent ALU
/// ops, so the out-of-order core behaves like a sequential machine.
Trace spaced_random_trace(std::uint64_t seed, std::uint32_t events);

/// Measures the quantity named by a scenario `expect` key.
std::uint64_t observe(const Trace& scenario, const std::string& key);

} // namespace harness
