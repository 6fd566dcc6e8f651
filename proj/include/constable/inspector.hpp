#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "constable/trace.hpp"

namespace constable {

enum class AddressingMode : std::uint8_t { PcRel = 0, StackRel = 1, RegRel = 2 };
inline constexpr std::size_t kNumModes = 3;

const char* mode_name(AddressingMode m);

class InspectorError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// {RIP} is PC-relative; a non-empty subset of {RSP, RBP} is stack-relative;
/// anything else is register-relative. Throws InspectorError on an empty set.
AddressingMode addressing_mode(const SourceRegs& src);

/// Distance bins: [1,50), [50,250], (250,inf).
enum class DistanceBin : std::uint8_t { Near = 0, Mid = 1, Far = 2 };
inline constexpr std::size_t kNumBins = 3;
DistanceBin distance_bin(std::uint64_t distance);

struct StaticLoadProfile {
  std::uint64_t pc = 0;
  std::uint64_t dynamic_count = 0;
  bool is_global_stable = true;
  AddressingMode mode = AddressingMode::RegRel;
  std::uint64_t stable_paddr = 0; // first instance's address/value; meaningful when stable
  std::uint64_t stable_value = 0;
  std::array<std::uint64_t, kNumBins> distance_histogram{};
  std::uint64_t median_distance = 0; // lower median over re-occurrences, 0 if none

  bool operator==(const StaticLoadProfile&) const = default;
};

struct InspectorAggregates {
  std::uint64_t dynamic_loads = 0;
  std::uint64_t global_stable_dynamic_loads = 0;
  double global_stable_dynamic_fraction = 0.0;
  /// Over dynamic global-stable loads, indexed by AddressingMode.
  std::array<double, kNumModes> mode_breakdown{};
  /// Over re-occurrences of global-stable loads, indexed by DistanceBin.
  std::array<double, kNumBins> distance_breakdown{};
  /// [mode][bin], each row normalized over that mode's re-occurrences.
  std::array<std::array<double, kNumBins>, kNumModes> per_mode_distance_breakdown{};

  bool operator==(const InspectorAggregates&) const = default;
};

struct InspectorReport {
  std::map<std::uint64_t, StaticLoadProfile> profiles;
  InspectorAggregates aggregates;

  std::unordered_set<std::uint64_t> global_stable_pcs() const;
};

/// One streaming pass over the trace.
InspectorReport analyze(const Trace& trace);

enum class ReportFormat { Csv, Json };

std::string format_report(const InspectorReport& report, ReportFormat format);
void export_report(const InspectorReport& report, ReportFormat format, const std::string& path);

} // namespace constable
