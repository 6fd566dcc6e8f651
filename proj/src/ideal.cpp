#include "constable/ideal.hpp"

#include <unordered_map>

namespace constable {

SimStats run_ideal(const Trace& trace, IdealMode mode, const InspectorReport& profiles, const CoreConfig& core,
                   const CacheConfig& caches, bool record_retired_loads) {
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  for (const auto& r : trace.records)
    if (r.is_load()) ++counts[r.pc];
  if (counts.size() != profiles.profiles.size())
    throw ProfileTraceMismatch("profile covers " + std::to_string(profiles.profiles.size()) +
                               " load PCs, trace has " + std::to_string(counts.size()));
  for (const auto& [pc, n] : counts) {
    auto it = profiles.profiles.find(pc);
    if (it == profiles.profiles.end() || it->second.dynamic_count != n)
      throw ProfileTraceMismatch("profile disagrees with trace at pc 0x" + hex(pc));
  }
  const auto stable = profiles.global_stable_pcs();
  NoopEngine engine;
  Memsys mem(caches);
  RunOptions opt;
  opt.mode = mode;
  opt.stable_pcs = &stable;
  opt.record_retired_loads = record_retired_loads;
  return run(trace, core, engine, mem, opt);
}

} // namespace constable
