#include <doctest.h>

#include "constable/ideal.hpp"
#include "constable/metrics.hpp"
#include "constable/scenarios.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace constable;

namespace {

const IdealMode kModes[] = {IdealMode::IdealConstable, IdealMode::IdealStableLVP, IdealMode::IdealStableLVP_DFE,
                            IdealMode::TwoXLoadWidth};

} // namespace

TEST_SUITE("ideal") {
  TEST_CASE("without stable loads the stable-load modes change nothing") {
    harness::TraceBuilder b;
    for (int i = 0; i < 2000; ++i) {
      b.store(0x300, {1}, 0x4000 + 64 * (i % 16), i);
      b.load(0x400, 2, {1}, 0x4000 + 64 * (i % 16));
      b.alu(0x404, 3, {2});
    }
    const InspectorReport r = analyze(b.trace);
    REQUIRE(r.aggregates.global_stable_dynamic_loads == 0);
    const SimStats base = harness::run_baseline(b.trace);
    for (IdealMode m : {IdealMode::IdealConstable, IdealMode::IdealStableLVP, IdealMode::IdealStableLVP_DFE}) {
      const SimStats s = run_ideal(b.trace, m, r, harness::checked_core());
      CHECK(s.cycles == base.cycles);
      if (m == IdealMode::IdealConstable) CHECK(stats_to_json(s) == stats_to_json(base));
      CHECK(s.eliminated_loads == 0);
    }
  }

  TEST_CASE("IdealConstable eliminates exactly the global-stable dynamic loads") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Trace t = harness::random_trace(seed, 20000);
      const InspectorReport ref = oracle::reference_analyze(t);
      const SimStats s = run_ideal(t, IdealMode::IdealConstable, analyze(t), harness::checked_core(), {}, true);
      CHECK(s.eliminated_loads == ref.aggregates.global_stable_dynamic_loads);
      const auto want = oracle::expected_load_values(t);
      for (const auto& l : s.retired_log) CHECK(l.value == want.at(l.seq_no));
    }
  }

  TEST_CASE("every mode passes the golden check") {
    const Trace t = harness::random_trace(11, 20000);
    const InspectorReport r = analyze(t);
    for (IdealMode m : kModes) {
      CAPTURE(ideal_mode_name(m));
      const SimStats s = run_ideal(t, m, r, harness::checked_core());
      CHECK(s.golden_checked_loads == s.retired_loads);
      CHECK(s.golden_mismatches == 0);
    }
  }

  TEST_CASE("profiles from another trace are rejected") {
    const Trace a = harness::random_trace(1, 5000), b = harness::random_trace(2, 5000);
    CHECK_THROWS_AS(run_ideal(a, IdealMode::IdealConstable, analyze(b), {}), ProfileTraceMismatch);
  }

  TEST_CASE("headroom modes never lose to the baseline on the port-bound scenario") {
    const Trace t = generate_scenario("port_bound");
    const InspectorReport r = analyze(t);
    const std::uint64_t base = harness::run_baseline(t).cycles;
    for (IdealMode m : kModes) {
      CAPTURE(ideal_mode_name(m));
      CHECK(run_ideal(t, m, r, harness::checked_core()).cycles < base);
    }
  }

  TEST_CASE("mode names") {
    CHECK(std::string(ideal_mode_name(IdealMode::None)) == "baseline");
    CHECK(std::string(ideal_mode_name(IdealMode::IdealStableLVP_DFE)) == "ideal-lvp-dfe");
  }
}
