#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "constable/config_file.hpp"

namespace constable {

struct VerifyOptions {
  std::uint64_t seeds = 200;
  std::uint64_t instructions = 100000;
  std::uint64_t first_seed = 1;
};

struct VerifyCase {
  std::uint64_t seed = 0;
  Settings settings; // workload and engine geometry drawn for this seed
};

enum class VerifyFailureKind { GoldenMismatch, Deadlock, Other };

struct VerifyFailure {
  std::uint64_t seed = 0;
  VerifyFailureKind kind = VerifyFailureKind::Other;
  std::string what;
};

struct VerifyReport {
  std::uint64_t runs = 0;
  std::uint64_t checked_loads = 0;
  std::uint64_t eliminations = 0;
  std::uint64_t flushes = 0;
  std::vector<VerifyFailure> failures;
  bool ok() const { return failures.empty(); }
};

/// Randomized workload knobs and engine geometry for one seed; small tables
/// and low thresholds are favoured so capacity and flush paths get exercised.
VerifyCase make_verify_case(std::uint64_t seed, std::uint64_t instructions);

/// One golden-checked Constable run; failures are returned, not thrown.
void run_verify_case(const VerifyCase& c, VerifyReport& report);

VerifyReport run_verify(const VerifyOptions& opt);

} // namespace constable
