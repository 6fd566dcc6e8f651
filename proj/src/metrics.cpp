#include "constable/metrics.hpp"

#include <cstdio>
#include <stdexcept>
#include <utility>

namespace constable {

namespace {

template <class S>
using Field = std::pair<const char*, std::uint64_t S::*>;

const Field<SimStats> kSimFields[] = {
    {"cycles", &SimStats::cycles},
    {"retired_instructions", &SimStats::retired_instructions},
    {"retired_loads", &SimStats::retired_loads},
    {"retired_stores", &SimStats::retired_stores},
    {"renamed_uops", &SimStats::renamed_uops},
    {"load_utilized_cycles", &SimStats::load_utilized_cycles},
    {"stable_load_on_port_cycles", &SimStats::stable_load_on_port_cycles},
    {"only_nonstable_cycles", &SimStats::only_nonstable_cycles},
    {"load_issue_deferrals", &SimStats::load_issue_deferrals},
    {"rs_allocations", &SimStats::rs_allocations},
    {"rs_allocations_committed", &SimStats::rs_allocations_committed},
    {"l1d_accesses", &SimStats::l1d_accesses},
    {"l1d_accesses_committed", &SimStats::l1d_accesses_committed},
    {"sb_forwards", &SimStats::sb_forwards},
    {"partial_overlap_waits", &SimStats::partial_overlap_waits},
    {"eliminated_loads", &SimStats::eliminated_loads},
    {"squashed_eliminations", &SimStats::squashed_eliminations},
    {"eliminations_at_rename", &SimStats::eliminations_at_rename},
    {"ordering_violation_flushes", &SimStats::ordering_violation_flushes},
    {"squashed_uops", &SimStats::squashed_uops},
    {"rename_stall_sld_read", &SimStats::rename_stall_sld_read},
    {"rename_stall_sld_write", &SimStats::rename_stall_sld_write},
    {"snoop_records", &SimStats::snoop_records},
    {"context_switches", &SimStats::context_switches},
    {"golden_checked_loads", &SimStats::golden_checked_loads},
    {"golden_mismatches", &SimStats::golden_mismatches},
};

const Field<MemsysStats> kMemFields[] = {
    {"l1d_load_accesses", &MemsysStats::l1d_load_accesses},
    {"l1d_store_accesses", &MemsysStats::l1d_store_accesses},
    {"l1d_hits", &MemsysStats::l1d_hits},
    {"l1d_misses", &MemsysStats::l1d_misses},
    {"l2_hits", &MemsysStats::l2_hits},
    {"l2_misses", &MemsysStats::l2_misses},
    {"l1d_evictions", &MemsysStats::l1d_evictions},
    {"snoops_delivered", &MemsysStats::snoops_delivered},
    {"snoops_filtered", &MemsysStats::snoops_filtered},
    {"pins", &MemsysStats::pins},
};

const Field<EngineStats> kEngineFields[] = {
    {"sld_reads", &EngineStats::sld_reads},
    {"sld_writes", &EngineStats::sld_writes},
    {"rmt_reads", &EngineStats::rmt_reads},
    {"rmt_writes", &EngineStats::rmt_writes},
    {"amt_reads", &EngineStats::amt_reads},
    {"amt_writes", &EngineStats::amt_writes},
    {"rmt_inserts", &EngineStats::rmt_inserts},
    {"amt_inserts", &EngineStats::amt_inserts},
    {"amt_evictions_store", &EngineStats::amt_evictions_store},
    {"amt_evictions_snoop", &EngineStats::amt_evictions_snoop},
    {"amt_evictions_capacity", &EngineStats::amt_evictions_capacity},
    {"amt_evictions_amt_i", &EngineStats::amt_evictions_amt_i},
    {"flag_resets_register", &EngineStats::flag_resets_register},
    {"flag_resets_store", &EngineStats::flag_resets_store},
    {"flag_resets_snoop", &EngineStats::flag_resets_snoop},
    {"flag_resets_capacity", &EngineStats::flag_resets_capacity},
    {"flag_resets_context", &EngineStats::flag_resets_context},
    {"flag_resets_amt_i", &EngineStats::flag_resets_amt_i},
    {"flag_resets_displacement", &EngineStats::flag_resets_displacement},
    {"flag_resets_mismatch", &EngineStats::flag_resets_mismatch},
    {"flags_set", &EngineStats::flags_set},
    {"likely_stable_marks", &EngineStats::likely_stable_marks},
    {"eliminations", &EngineStats::eliminations},
    {"xprf_full_rejections", &EngineStats::xprf_full_rejections},
    {"sld_allocations", &EngineStats::sld_allocations},
    {"sld_evictions", &EngineStats::sld_evictions},
    {"sld_collisions", &EngineStats::sld_collisions},
    {"rmt_displacements", &EngineStats::rmt_displacements},
    {"amt_displacements", &EngineStats::amt_displacements},
};

const std::pair<const char*, PortClassStats SimStats::*> kPortFields[] = {
    {"alu", &SimStats::alu_ports}, {"agu", &SimStats::agu_ports}, {"load", &SimStats::load_ports},
    {"sta", &SimStats::sta_ports}, {"std", &SimStats::std_ports},
};

double frac(double num, double den) { return den == 0 ? 0.0 : num / den; }

} // namespace

void EnergyModel::validate() const {
  for (const StructureEnergy* s : {&sld, &rmt, &amt})
    if (!(s->read_pj > 0 && s->write_pj > 0 && s->leakage_mw > 0 && s->area_mm2 > 0))
      throw std::invalid_argument("energy model values must be positive");
  if (!(frequency_hz > 0)) throw std::invalid_argument("frequency must be positive");
}

AccessCounts access_counts(const SimStats& s) {
  const EngineStats& e = s.engine;
  return {e.sld_reads, e.sld_writes, e.rmt_reads, e.rmt_writes, e.amt_reads, e.amt_writes, s.cycles};
}

EnergyReport compute_energy(const AccessCounts& c, const EnergyModel& m) {
  EnergyReport r;
  r.sld_dynamic_pj = static_cast<double>(c.sld_reads) * m.sld.read_pj + static_cast<double>(c.sld_writes) * m.sld.write_pj;
  r.rmt_dynamic_pj = static_cast<double>(c.rmt_reads) * m.rmt.read_pj + static_cast<double>(c.rmt_writes) * m.rmt.write_pj;
  r.amt_dynamic_pj = static_cast<double>(c.amt_reads) * m.amt.read_pj + static_cast<double>(c.amt_writes) * m.amt.write_pj;
  r.dynamic_pj = r.sld_dynamic_pj + r.rmt_dynamic_pj + r.amt_dynamic_pj;
  // mW * s = mJ = 1e9 pJ
  const double seconds = static_cast<double>(c.cycles) / m.frequency_hz;
  r.sld_leakage_pj = m.sld.leakage_mw * seconds * 1e9;
  r.rmt_leakage_pj = m.rmt.leakage_mw * seconds * 1e9;
  r.amt_leakage_pj = m.amt.leakage_mw * seconds * 1e9;
  r.leakage_pj = r.sld_leakage_pj + r.rmt_leakage_pj + r.amt_leakage_pj;
  r.total_pj = r.dynamic_pj + r.leakage_pj;
  return r;
}

EnergyReport compute_energy(const SimStats& stats, const EnergyModel& model) {
  return compute_energy(access_counts(stats), model);
}

LoadCycleSplit classify_load_cycles(const SimStats& s) {
  const double c = static_cast<double>(s.cycles);
  return {frac(static_cast<double>(s.load_utilized_cycles), c),
          frac(static_cast<double>(s.stable_load_on_port_cycles), c),
          frac(static_cast<double>(s.only_nonstable_cycles), c)};
}

RunDelta compare_runs(const SimStats& a, const SimStats& b) {
  RunDelta d;
  d.cycles_a = a.cycles;
  d.cycles_b = b.cycles;
  d.speedup = b.cycles == 0 ? 0.0 : static_cast<double>(a.cycles) / static_cast<double>(b.cycles) - 1.0;
  d.rs_allocation_reduction = static_cast<std::int64_t>(a.rs_allocations) - static_cast<std::int64_t>(b.rs_allocations);
  d.rs_allocation_reduction_fraction =
      frac(static_cast<double>(d.rs_allocation_reduction), static_cast<double>(a.rs_allocations));
  d.l1d_access_reduction = static_cast<std::int64_t>(a.l1d_accesses) - static_cast<std::int64_t>(b.l1d_accesses);
  d.l1d_access_reduction_fraction =
      frac(static_cast<double>(d.l1d_access_reduction), static_cast<double>(a.l1d_accesses));
  d.coverage_a = frac(static_cast<double>(a.eliminated_loads), static_cast<double>(a.retired_loads));
  d.coverage_b = frac(static_cast<double>(b.eliminated_loads), static_cast<double>(b.retired_loads));
  d.dynamic_energy_delta_pj = compute_energy(b).dynamic_pj - compute_energy(a).dynamic_pj;
  return d;
}

nlohmann::ordered_json stats_to_json(const SimStats& s, const EnergyModel& model) {
  nlohmann::ordered_json j;
  for (const auto& [name, m] : kSimFields) j[name] = s.*m;
  auto& ports = j["ports"];
  for (const auto& [name, m] : kPortFields) {
    ports[name]["uses"] = (s.*m).uses;
    ports[name]["busy_cycles"] = (s.*m).busy_cycles;
  }
  for (const auto& [name, m] : kMemFields) j["memsys"][name] = s.memsys.*m;
  for (const auto& [name, m] : kEngineFields) j["engine"][name] = s.engine.*m;
  const LoadCycleSplit split = classify_load_cycles(s);
  j["derived"]["ipc"] = frac(static_cast<double>(s.retired_instructions), static_cast<double>(s.cycles));
  j["derived"]["coverage"] = frac(static_cast<double>(s.eliminated_loads), static_cast<double>(s.retired_loads));
  j["derived"]["load_utilized_fraction"] = split.load_utilized_fraction;
  j["derived"]["stable_on_port_fraction"] = split.stable_on_port_fraction;
  j["derived"]["only_nonstable_fraction"] = split.only_nonstable_fraction;
  const EnergyReport e = compute_energy(s, model);
  auto& ej = j["energy_pj"];
  ej["sld_dynamic"] = e.sld_dynamic_pj;
  ej["rmt_dynamic"] = e.rmt_dynamic_pj;
  ej["amt_dynamic"] = e.amt_dynamic_pj;
  ej["dynamic"] = e.dynamic_pj;
  ej["leakage"] = e.leakage_pj;
  ej["total"] = e.total_pj;
  return j;
}

SimStats stats_from_json(const nlohmann::json& j) {
  SimStats s;
  for (const auto& [name, m] : kSimFields) s.*m = j.at(name).get<std::uint64_t>();
  if (j.contains("ports"))
    for (const auto& [name, m] : kPortFields) {
      const auto& p = j["ports"].at(name);
      (s.*m).uses = p.at("uses").get<std::uint64_t>();
      (s.*m).busy_cycles = p.at("busy_cycles").get<std::vector<std::uint64_t>>();
    }
  if (j.contains("memsys"))
    for (const auto& [name, m] : kMemFields) s.memsys.*m = j["memsys"].at(name).get<std::uint64_t>();
  if (j.contains("engine"))
    for (const auto& [name, m] : kEngineFields) s.engine.*m = j["engine"].at(name).get<std::uint64_t>();
  return s;
}

std::string stats_to_csv(const SimStats& s, const EnergyModel& model) {
  // Flattened dotted keys of the JSON form, one per row.
  std::string out = "key,value\n";
  const auto j = stats_to_json(s, model).flatten();
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string key = it.key().substr(1);
    for (auto& ch : key)
      if (ch == '/') ch = '.';
    out += key + "," + it.value().dump() + "\n";
  }
  return out;
}

nlohmann::ordered_json delta_to_json(const RunDelta& d) {
  nlohmann::ordered_json j;
  j["cycles_a"] = d.cycles_a;
  j["cycles_b"] = d.cycles_b;
  j["speedup"] = d.speedup;
  j["rs_allocation_reduction"] = d.rs_allocation_reduction;
  j["rs_allocation_reduction_fraction"] = d.rs_allocation_reduction_fraction;
  j["l1d_access_reduction"] = d.l1d_access_reduction;
  j["l1d_access_reduction_fraction"] = d.l1d_access_reduction_fraction;
  j["coverage_a"] = d.coverage_a;
  j["coverage_b"] = d.coverage_b;
  j["dynamic_energy_delta_pj"] = d.dynamic_energy_delta_pj;
  return j;
}

} // namespace constable
