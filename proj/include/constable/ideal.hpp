#pragma once

#include <stdexcept>

#include "constable/inspector.hpp"
#include "constable/pipeline.hpp"

namespace constable {

class ProfileTraceMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Runs one headroom configuration with a no-op engine and a fresh memory
/// system. `profiles` must come from analyze() on the same trace.
SimStats run_ideal(const Trace& trace, IdealMode mode, const InspectorReport& profiles, const CoreConfig& core,
                   const CacheConfig& caches = {}, bool record_retired_loads = false);

} // namespace constable
