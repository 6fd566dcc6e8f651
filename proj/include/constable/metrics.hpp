#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "constable/pipeline.hpp"

namespace constable {

struct StructureEnergy {
  double read_pj = 0;
  double write_pj = 0;
  double leakage_mw = 0;
  double area_mm2 = 0;
};

/// Per-access energy, leakage and area of the three Constable tables (14 nm).
struct EnergyModel {
  StructureEnergy sld{10.76, 16.70, 1.02, 0.211};
  StructureEnergy rmt{0.15, 0.20, 0.31, 0.004};
  StructureEnergy amt{1.58, 4.22, 0.74, 0.017};
  double frequency_hz = 3.2e9;

  void validate() const;
};

struct AccessCounts {
  std::uint64_t sld_reads = 0, sld_writes = 0;
  std::uint64_t rmt_reads = 0, rmt_writes = 0;
  std::uint64_t amt_reads = 0, amt_writes = 0;
  std::uint64_t cycles = 0;
};

AccessCounts access_counts(const SimStats& stats);

struct EnergyReport {
  double sld_dynamic_pj = 0, rmt_dynamic_pj = 0, amt_dynamic_pj = 0;
  double dynamic_pj = 0;
  double sld_leakage_pj = 0, rmt_leakage_pj = 0, amt_leakage_pj = 0;
  double leakage_pj = 0;
  double total_pj = 0;
};

EnergyReport compute_energy(const AccessCounts& counts, const EnergyModel& model = {});
EnergyReport compute_energy(const SimStats& stats, const EnergyModel& model = {});

struct LoadCycleSplit {
  double load_utilized_fraction = 0;
  double stable_on_port_fraction = 0;
  double only_nonstable_fraction = 0;
};

/// Fractions of all cycles with at least one load port busy, split by
/// whether a global-stable load was among them.
LoadCycleSplit classify_load_cycles(const SimStats& stats);

struct RunDelta {
  std::uint64_t cycles_a = 0, cycles_b = 0;
  double speedup = 0; // cycles_a / cycles_b - 1
  std::int64_t rs_allocation_reduction = 0;
  double rs_allocation_reduction_fraction = 0;
  std::int64_t l1d_access_reduction = 0;
  double l1d_access_reduction_fraction = 0;
  double coverage_a = 0, coverage_b = 0; // eliminated / retired loads
  double dynamic_energy_delta_pj = 0;    // b - a
};

/// `a` is the reference run (usually the baseline).
RunDelta compare_runs(const SimStats& a, const SimStats& b);

nlohmann::ordered_json stats_to_json(const SimStats& stats, const EnergyModel& model = {});
SimStats stats_from_json(const nlohmann::json& j);
std::string stats_to_csv(const SimStats& stats, const EnergyModel& model = {});
nlohmann::ordered_json delta_to_json(const RunDelta& d);

} // namespace constable
