#include "constable/functional.hpp"

namespace constable {

FunctionalState replay_functional(const Trace& trace) {
  FunctionalState st;
  for (const auto& chunk : trace.init) st.memory.apply(chunk);
  for (const auto& r : trace.records) {
    if (r.is_load()) {
      st.loads.emplace(r.seq_no,
                       LoadExpectation{r.mem_paddr, r.mem_size, st.memory.read(r.mem_paddr, r.mem_size)});
    } else if (r.is_store()) {
      st.memory.write(r.mem_paddr, r.mem_size, r.mem_value);
    }
  }
  return st;
}

SanityReport sanity_check(const Trace& trace) {
  SanityReport report;
  MemoryImage mem;
  for (const auto& chunk : trace.init) mem.apply(chunk);
  for (const auto& r : trace.records) {
    if (r.is_load()) {
      const std::uint64_t v = mem.read(r.mem_paddr, r.mem_size);
      if (v != r.mem_value) report.violations.push_back({r.seq_no, r.mem_paddr, r.mem_value, v});
    } else if (r.is_store()) {
      mem.write(r.mem_paddr, r.mem_size, r.mem_value);
    }
  }
  return report;
}

} // namespace constable
