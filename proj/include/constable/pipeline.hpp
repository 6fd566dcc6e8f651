#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "constable/engine.hpp"
#include "constable/memsys.hpp"
#include "constable/trace.hpp"

namespace constable {

struct CoreConfig {
  std::uint32_t rename_width = 6;
  std::uint32_t retire_width = 6;
  std::uint32_t rob_size = 512;
  std::uint32_t lb_size = 240;
  std::uint32_t sb_size = 112;
  std::uint32_t rs_size = 248;
  std::uint32_t alu_ports = 5;
  std::uint32_t agu_ports = 3;
  std::uint32_t load_ports = 3;
  std::uint32_t sta_ports = 2;
  std::uint32_t std_ports = 2;
  /// Extra cycles between a store's issue and its address resolution.
  std::uint32_t store_address_delay = 0;
  /// Multiplies agu_ports and load_ports.
  std::uint32_t load_width_multiplier = 1;
  bool golden_check = false;
  /// Cycles without a retirement before StructuralDeadlock is raised.
  std::uint64_t deadlock_cycles = 20000;

  void validate() const;
};

/// Headroom configurations driven by offline stable-load knowledge.
enum class IdealMode : std::uint8_t { None, IdealConstable, IdealStableLVP, IdealStableLVP_DFE, TwoXLoadWidth };

const char* ideal_mode_name(IdealMode m);

struct RetiredLoad {
  std::uint64_t seq_no = 0;
  std::uint64_t paddr = 0;
  std::uint64_t value = 0;
  bool eliminated = false;
  bool marked_likely_stable = false;
};

struct PortClassStats {
  std::vector<std::uint64_t> busy_cycles; // [i]: cycles in which port i was used
  std::uint64_t uses = 0;
};

struct SimStats {
  std::uint64_t cycles = 0;
  std::uint64_t retired_instructions = 0;
  std::uint64_t retired_loads = 0;
  std::uint64_t retired_stores = 0;
  std::uint64_t renamed_uops = 0;

  PortClassStats alu_ports, agu_ports, load_ports, sta_ports, std_ports;
  std::uint64_t load_utilized_cycles = 0;
  std::uint64_t stable_load_on_port_cycles = 0;
  std::uint64_t only_nonstable_cycles = 0;
  std::uint64_t load_issue_deferrals = 0;

  std::uint64_t rs_allocations = 0;
  std::uint64_t rs_allocations_committed = 0;
  std::uint64_t l1d_accesses = 0; // every load execution, squashed ones included
  std::uint64_t l1d_accesses_committed = 0;
  std::uint64_t sb_forwards = 0;
  std::uint64_t partial_overlap_waits = 0;

  std::uint64_t eliminated_loads = 0; // retired
  std::uint64_t squashed_eliminations = 0;
  std::uint64_t eliminations_at_rename = 0;
  std::uint64_t ordering_violation_flushes = 0;
  std::uint64_t squashed_uops = 0;
  std::uint64_t rename_stall_sld_read = 0;
  std::uint64_t rename_stall_sld_write = 0;
  std::uint64_t snoop_records = 0;
  std::uint64_t context_switches = 0;
  std::uint64_t golden_checked_loads = 0;
  std::uint64_t golden_mismatches = 0;

  MemsysStats memsys;
  EngineStats engine;
  std::vector<RetiredLoad> retired_log; // only with RunOptions::record_retired_loads
};

class GoldenCheckMismatch : public std::runtime_error {
public:
  GoldenCheckMismatch(std::uint64_t seq_no, std::uint64_t expected_addr, std::uint64_t expected_value,
                      std::uint64_t got_addr, std::uint64_t got_value);
  std::uint64_t seq_no, expected_addr, expected_value, got_addr, got_value;
};

class StructuralDeadlock : public std::runtime_error {
public:
  StructuralDeadlock(std::uint64_t cycle, std::uint64_t rob_head_seq);
  std::uint64_t cycle, rob_head_seq;
};

struct RunOptions {
  IdealMode mode = IdealMode::None;
  /// Global-stable PCs: drive the ideal modes and the load-port cycle split.
  const std::unordered_set<std::uint64_t>* stable_pcs = nullptr;
  bool record_retired_loads = false;
  /// Two-core mode: the other core's stores arrive as remote writes, ordered
  /// by seq_no against this trace.
  const Trace* mirror = nullptr;
};

SimStats run(const Trace& trace, const CoreConfig& core, EliminationEngine& engine, Memsys& memsys,
             const RunOptions& options = {});

} // namespace constable
