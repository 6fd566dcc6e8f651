#include "constable/verify.hpp"

#include <random>

#include "constable/memsys.hpp"
#include "constable/pipeline.hpp"

namespace constable {

VerifyCase make_verify_case(std::uint64_t seed, std::uint64_t instructions) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 17);
  auto pick = [&](std::initializer_list<std::uint32_t> xs) { return *(xs.begin() + rng() % xs.size()); };
  auto u01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  VerifyCase c;
  c.seed = seed;
  GenConfig& g = c.settings.gen;
  g.n_instructions = instructions;
  g.seed = seed;
  g.stable_load_fraction = 0.1 + 0.6 * u01();
  g.store_interference_rate = 0.2 * u01();
  g.silent_store_rate = u01();
  g.snoop_rate = 0.002 * u01();
  g.register_overwrite_rate = 0.05 * u01();
  g.ordering_violation_rate = 0.02 * u01();
  g.context_switch_rate = rng() % 3 == 0 ? 0.0002 * u01() : 0.0;
  g.far_load_fraction = 0.05 * u01();

  ConstableConfig& k = c.settings.constable;
  if (seed % 2) {
    // Roomy tables, low threshold: many eliminations exposed to every hazard.
    k.threshold = pick({2, 4, 8});
  } else {
    k.threshold = pick({2, 4, 8, 16, 30});
    k.sld_sets = pick({4, 8, 32});
    k.sld_ways = pick({2, 4, 16});
    k.rmt_stack_capacity = pick({1, 2, 4, 16});
    k.rmt_other_capacity = pick({1, 2, 8});
    k.amt_sets = pick({1, 4, 32});
    k.amt_ways = pick({1, 2, 8});
    k.amt_pcs_per_entry = pick({1, 2, 4});
    k.xprf_size = pick({1, 4, 32});
    k.sld_read_ports = pick({1, 3});
    k.sld_write_ports = pick({1, 2});
  }
  k.amt_index = rng() % 4 == 0 ? AmtIndex::FullAddress : AmtIndex::Cacheline;
  k.amt_i_mode = rng() % 4 == 0;
  k.context_switch_clears_confidence = rng() % 4 == 0;

  CoreConfig& core = c.settings.core;
  core.golden_check = true;
  core.store_address_delay = pick({0, 0, 3, 20});
  return c;
}

void run_verify_case(const VerifyCase& c, VerifyReport& report) {
  ++report.runs;
  try {
    const Trace t = generate(c.settings.gen);
    ConstableEngine engine(c.settings.constable);
    Memsys mem(c.settings.caches, c.settings.constable.amt_i_mode ? EvictionPolicy::AmtInvalidate : EvictionPolicy::PinCv);
    const SimStats s = run(t, c.settings.core, engine, mem);
    report.checked_loads += s.golden_checked_loads;
    report.eliminations += s.eliminated_loads;
    report.flushes += s.ordering_violation_flushes;
  } catch (const GoldenCheckMismatch& e) {
    report.failures.push_back({c.seed, VerifyFailureKind::GoldenMismatch, e.what()});
  } catch (const StructuralDeadlock& e) {
    report.failures.push_back({c.seed, VerifyFailureKind::Deadlock, e.what()});
  } catch (const std::exception& e) {
    report.failures.push_back({c.seed, VerifyFailureKind::Other, e.what()});
  }
}

VerifyReport run_verify(const VerifyOptions& opt) {
  VerifyReport r;
  for (std::uint64_t i = 0; i < opt.seeds; ++i) run_verify_case(make_verify_case(opt.first_seed + i, opt.instructions), r);
  return r;
}

} // namespace constable
