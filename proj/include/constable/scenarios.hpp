#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "constable/trace.hpp"

namespace constable {

class UnknownScenario : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Named hazard traces. Each ends in `expect key=value ...` comment lines
/// holding the counts a simulation must reproduce.
const std::vector<std::string>& scenario_names();
Trace generate_scenario(const std::string& name, std::uint64_t seed = 1);

/// Independent ALU ops between load groups in the hazard scenarios; longer
/// than the default ROB, so consecutive groups never overlap in flight.
inline constexpr std::uint32_t kScenarioSpacing = 600;

} // namespace constable
