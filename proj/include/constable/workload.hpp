#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "constable/trace.hpp"

namespace constable {

class InfeasibleConfig : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct GenConfig {
  std::uint64_t n_instructions = 100000;
  std::uint64_t seed = 1;
  /// Share of dynamic loads that belong to global-stable PCs.
  double stable_load_fraction = 0.35;
  /// pc_rel, stack_rel, reg_rel; over dynamic global-stable loads.
  std::array<double, 3> addressing_mode_mix{0.25, 0.40, 0.35};
  /// <50, 50..250, >250 instructions; over re-occurrences of global-stable loads.
  std::array<double, 3> inter_occurrence_profile{0.45, 0.35, 0.20};
  /// Share of stores aimed at a line some stable or phase-stable load reads.
  double store_interference_rate = 0.05;
  /// Share of stores that write the value already in memory.
  double silent_store_rate = 0.10;
  /// Remote-write (`N`) records per instruction.
  double snoop_rate = 0.0005;
  /// Share of ALU ops that overwrite a load base register.
  double register_overwrite_rate = 0.02;
  /// Per phase-stable load instance: chance it is preceded by a store whose
  /// address waits on a cache miss and then hits the load's address.
  double ordering_violation_rate = 0.002;

  // Knobs beyond the core set.
  double context_switch_rate = 0.0; // `X` records per instruction
  double load_fraction = 0.30;
  double store_fraction = 0.10;
  double branch_fraction = 0.10;
  double phase_load_fraction = 0.30; // of non-stable loads: stable for a while, then move
  double far_load_fraction = 0.02;   // of non-stable loads: miss to memory
  double mean_stable_lifetime = 48;  // instances per global-stable PC
  double mean_phase_length = 40;     // instances between phase changes

  /// Throws InfeasibleConfig.
  void validate() const;
};

/// Pure function of the config (seed included).
Trace generate(const GenConfig& config);

} // namespace constable
