#include <doctest.h>

#include <sstream>

#include "constable/functional.hpp"
#include "constable/scenarios.hpp"
#include "harness.hpp"

using namespace constable;

TEST_SUITE("scenarios") {
  TEST_CASE("every embedded expectation holds when simulated") {
    for (const auto& name : scenario_names()) {
      CAPTURE(name);
      const Trace t = generate_scenario(name);
      CHECK(sanity_check(t).ok());
      std::size_t checked = 0;
      for (const auto& c : t.comments) {
        std::istringstream in(c);
        std::string word;
        in >> word;
        if (word != "expect") continue;
        while (in >> word) {
          const auto eq = word.find('=');
          REQUIRE(eq != std::string::npos);
          const std::string key = word.substr(0, eq);
          CAPTURE(key);
          CHECK(harness::observe(t, key) == std::stoull(word.substr(eq + 1)));
          ++checked;
        }
      }
      CHECK(checked > 0);
    }
  }

  TEST_CASE("scenarios are deterministic per seed") {
    for (const auto& name : scenario_names()) CHECK(generate_scenario(name, 3) == generate_scenario(name, 3));
  }

  TEST_CASE("unknown names are rejected") { CHECK_THROWS_AS(generate_scenario("nope"), UnknownScenario); }
}
