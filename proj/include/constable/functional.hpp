#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "constable/memory_image.hpp"
#include "constable/trace.hpp"

namespace constable {

struct LoadExpectation {
  std::uint64_t paddr = 0;
  std::uint8_t size = 0;
  std::uint64_t value = 0;
  bool operator==(const LoadExpectation&) const = default;
};

/// Memory image after replaying the trace plus the value every load must see.
struct FunctionalState {
  MemoryImage memory;
  std::unordered_map<std::uint64_t, LoadExpectation> loads; // keyed by seq_no

  const LoadExpectation* expected(std::uint64_t seq_no) const {
    auto it = loads.find(seq_no);
    return it == loads.end() ? nullptr : &it->second;
  }
};

FunctionalState replay_functional(const Trace& trace);

struct SanityViolation {
  std::uint64_t seq_no = 0;
  std::uint64_t paddr = 0;
  std::uint64_t recorded = 0;
  std::uint64_t expected = 0;
};

struct SanityReport {
  std::vector<SanityViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Every load whose recorded value disagrees with the functional replay.
SanityReport sanity_check(const Trace& trace);

} // namespace constable
