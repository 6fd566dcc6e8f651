#include <doctest.h>

#include "constable/pipeline.hpp"
#include "constable/scenarios.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace constable;

namespace {

std::uint64_t instruction_count(const Trace& t) {
  std::uint64_t n = 0;
  for (const auto& r : t.records) n += r.is_instruction();
  return n;
}

void check_values(const Trace& t, const SimStats& s) {
  const auto want = oracle::expected_load_values(t);
  REQUIRE(s.retired_log.size() == want.size());
  for (const auto& l : s.retired_log) REQUIRE(l.value == want.at(l.seq_no));
}

} // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("every retired load passes the golden check on random traces") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      CAPTURE(seed);
      const Trace t = harness::random_trace(seed, 20000);
      const SimStats b = harness::run_baseline(t, true);
      const SimStats c = harness::run_constable(t, harness::stress_config(seed), true);
      CHECK(b.retired_instructions == instruction_count(t));
      CHECK(c.retired_instructions == instruction_count(t));
      CHECK(c.golden_checked_loads == c.retired_loads);
      CHECK(c.golden_mismatches == 0);
      check_values(t, b);
      check_values(t, c);
    }
  }

  TEST_CASE("retired load stream is identical with and without the engine") {
    for (std::uint64_t seed = 20; seed < 24; ++seed) {
      const Trace t = harness::random_trace(seed, 15000);
      const SimStats b = harness::run_baseline(t, true);
      ConstableConfig cfg;
      cfg.threshold = 4;
      const SimStats c = harness::run_constable(t, cfg, true);
      REQUIRE(b.retired_log.size() == c.retired_log.size());
      for (std::size_t i = 0; i < b.retired_log.size(); ++i) {
        CHECK(b.retired_log[i].seq_no == c.retired_log[i].seq_no);
        CHECK(b.retired_log[i].paddr == c.retired_log[i].paddr);
        CHECK(b.retired_log[i].value == c.retired_log[i].value);
      }
      CHECK(c.eliminated_loads > 0);
    }
  }

  TEST_CASE("store-to-load forwarding and partial overlap") {
    harness::TraceBuilder b;
    b.init(0x1000, 0x1111111111111111);
    b.store(0x10, {1}, 0x1000, 0xabcdef0123456789);
    b.load(0x14, 2, {1}, 0x1000); // full forward
    b.load(0x18, 2, {1}, 0x1004, 4); // contained in the store
    b.store(0x1c, {1}, 0x1010, 0x77, 1);
    b.load(0x20, 3, {1}, 0x1010); // wider than the store: waits for it
    b.pad(50);
    const SimStats s = harness::run_baseline(b.trace, true);
    CHECK(s.sb_forwards == 2);
    CHECK(s.partial_overlap_waits >= 1);
    check_values(b.trace, s);
  }

  TEST_CASE("an ordering violation flushes younger uops only") {
    const Trace t = generate_scenario("ordering_violation");
    const SimStats s = harness::run_baseline(t, true);
    CHECK(s.ordering_violation_flushes == 1);
    CHECK(s.squashed_uops > 0);
    CHECK(s.retired_instructions == instruction_count(t));
    check_values(t, s);
  }

  TEST_CASE("late store addresses produce flushes that still retire correctly") {
    CoreConfig core = harness::checked_core();
    core.store_address_delay = 20;
    const Trace t = harness::random_trace(31, 20000);
    const SimStats s = harness::run_constable(t, harness::stress_config(31), true, core);
    CHECK(s.ordering_violation_flushes > 0);
    check_values(t, s);
  }

  TEST_CASE("disabling store invalidation is caught by the golden check") {
    const Trace t = generate_scenario("store_invalidate");
    ConstableConfig broken;
    broken.disable_store_invalidation = true;
    CHECK_THROWS_AS(harness::run_constable(t, broken), GoldenCheckMismatch);
    CoreConfig quiet;
    const SimStats s = harness::run_constable(t, broken, true, quiet);
    const auto want = oracle::expected_load_values(t);
    std::size_t wrong = 0;
    for (const auto& l : s.retired_log) wrong += l.value != want.at(l.seq_no);
    CHECK(wrong > 0);
  }

  TEST_CASE("eliminated loads skip the RS and the L1-D") {
    const Trace t = generate_scenario("pure_stable");
    const SimStats b = harness::run_baseline(t);
    const SimStats c = harness::run_constable(t);
    CHECK(c.eliminated_loads == 68);
    CHECK(b.rs_allocations - c.rs_allocations == 68);
    CHECK(b.l1d_accesses - c.l1d_accesses == 68);
    CHECK(c.cycles <= b.cycles);
  }

  TEST_CASE("remote writes from a mirror core invalidate monitored lines") {
    harness::TraceBuilder main, other;
    main.init(0x9000, 42);
    for (int i = 0; i < 80; ++i) {
      main.load(0x400000, 6, {kRip}, 0x9000);
      main.pad();
      other.pad();
      if (i >= 50 && i % 5 == 0) other.store(0x800000, {1}, 0x9020, i); // same line, other bytes
      else other.alu(0x800004, 1, {});
    }
    Trace mirror = other.trace;
    ConstableEngine e;
    Memsys m;
    RunOptions o;
    o.mirror = &mirror;
    const SimStats s = run(main.trace, harness::checked_core(), e, m, o);
    CHECK(s.memsys.snoops_delivered == 6);
    CHECK(s.engine.flag_resets_snoop == 6);
    CHECK(s.eliminated_loads < 80 - 32);
    const SimStats alone = harness::run_constable(main.trace);
    CHECK(alone.eliminated_loads == 80 - 32);
  }

  TEST_CASE("lack of retirement trips the deadlock guard") {
    harness::TraceBuilder b;
    b.load(0x10, 1, {2}, 0x123000);
    b.pad(10);
    CoreConfig core;
    core.deadlock_cycles = 50; // shorter than a memory access
    CHECK_THROWS_AS(harness::run_baseline(b.trace, false, nullptr, core), StructuralDeadlock);
    core.deadlock_cycles = 1000;
    CHECK_NOTHROW(harness::run_baseline(b.trace, false, nullptr, core));
  }

  TEST_CASE("three ready loads fit the load ports, a fourth waits") {
    for (int n : {3, 4}) {
      harness::TraceBuilder b;
      for (int i = 0; i < n; ++i) b.load(0x10 + 4 * i, static_cast<RegId>(6 + i), {kRip}, 0x1000 + 64 * i);
      b.pad(20);
      const SimStats s = harness::run_baseline(b.trace);
      CHECK(s.load_issue_deferrals == static_cast<std::uint64_t>(n - 3));
    }
  }

  TEST_CASE("core configuration is validated") {
    CoreConfig c;
    c.rob_size = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.rename_width = 0;
    CHECK_THROWS(c.validate());
    CHECK_NOTHROW(CoreConfig{}.validate());
  }

  TEST_CASE("empty and load-free traces") {
    CHECK(harness::run_constable(Trace{}).cycles == 0);
    harness::TraceBuilder b;
    b.pad(100);
    const SimStats s = harness::run_constable(b.trace);
    CHECK(s.retired_instructions == 100);
    CHECK(s.retired_loads == 0);
  }
}
