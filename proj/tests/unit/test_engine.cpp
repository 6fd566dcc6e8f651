#include <doctest.h>

#include <unordered_map>

#include "constable/engine.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace constable;

namespace {

struct Driver {
  ConstableEngine& e;
  std::uint64_t uid = 0;

  // One load instance, looked up and written back before anything else.
  RenameDecision step(std::uint64_t pc, SourceRegs src, std::uint64_t addr, std::uint64_t value, std::uint8_t size = 8) {
    const std::uint64_t u = ++uid;
    const LookupResult r = e.lookup_at_rename(pc, src, u);
    if (r.decision == RenameDecision::Eliminate) {
      CHECK(r.value == value);
      CHECK(r.addr == addr);
      e.release_xprf(u);
      return r.decision;
    }
    e.on_writeback(pc, src, addr, size, value, r.decision == RenameDecision::MarkLikelyStable, u);
    return r.decision;
  }

  // Runs instances until one is eliminated; returns how many it took.
  int train(std::uint64_t pc, SourceRegs src, std::uint64_t addr, std::uint64_t value) {
    for (int i = 1; i <= 200; ++i)
      if (step(pc, src, addr, value) == RenameDecision::Eliminate) return i;
    return -1;
  }
};

ConstableConfig low_threshold() {
  ConstableConfig c;
  c.threshold = 2;
  return c;
}

} // namespace

TEST_SUITE("engine") {
  TEST_CASE("threshold 30: 31 executions, a mark at 32, elimination from 33") {
    ConstableEngine e;
    Driver d{e};
    for (int i = 1; i <= 31; ++i) CHECK(d.step(0x400000, {kRip}, 0x1000, 7) == RenameDecision::Normal);
    CHECK(e.sld(0x400000).confidence == 30);
    CHECK(d.step(0x400000, {kRip}, 0x1000, 7) == RenameDecision::MarkLikelyStable);
    CHECK(e.sld(0x400000).can_eliminate);
    CHECK(e.sld(0x400000).confidence == 31);
    for (int i = 33; i <= 40; ++i) CHECK(d.step(0x400000, {kRip}, 0x1000, 7) == RenameDecision::Eliminate);
    CHECK(e.stats().eliminations == 8);
    CHECK(e.stats().likely_stable_marks == 1);
    CHECK(e.stats().flags_set == 1);
  }

  TEST_CASE("setting the flag registers the load with RMT and AMT") {
    ConstableEngine e(low_threshold());
    Driver d{e};
    d.train(0x400000, {kRsp, 3}, 0x2040, 9);
    const std::uint32_t h = hash_pc(0x400000);
    CHECK(e.rmt_list(kRsp) == std::vector<std::uint32_t>{h});
    CHECK(e.rmt_list(3) == std::vector<std::uint32_t>{h});
    CHECK(e.amt_list(0x2040) == std::vector<std::uint32_t>{h});
    CHECK(e.amt_list(0x2078) == std::vector<std::uint32_t>{h}); // same line
    CHECK(e.amt_list(0x2080).empty());
  }

  TEST_CASE("RIP sources never enter the RMT") {
    ConstableEngine e(low_threshold());
    Driver d{e};
    d.train(0x400000, {kRip}, 0x2000, 1);
    CHECK(e.rmt_list(kRip).empty());
    CHECK(e.on_dest_register_write(kRip) == 0);
    CHECK(e.sld(0x400000).can_eliminate);
  }

  TEST_CASE("a mismatch halves confidence and clears the flag") {
    ConstableEngine e;
    Driver d{e};
    for (int i = 0; i < 60; ++i) d.step(0x400000, {kRip}, 0x1000, 7);
    CHECK(e.sld(0x400000).confidence == 31); // saturated
    e.on_snoop(0x1000);
    CHECK(d.step(0x400000, {kRip}, 0x1000, 8) == RenameDecision::MarkLikelyStable);
    CHECK(e.sld(0x400000).confidence == 15);
    CHECK(!e.sld(0x400000).can_eliminate);
    CHECK(e.sld(0x400000).last_value == 8);
    d.step(0x400000, {kRip}, 0x2000, 8);
    CHECK(e.sld(0x400000).confidence == 7);
  }

  TEST_CASE("each reset source withdraws the flag") {
    auto flagged = [](ConstableConfig c = low_threshold()) {
      auto e = std::make_unique<ConstableEngine>(c);
      Driver d{*e};
      d.train(0x400000, {1}, 0x3008, 5);
      REQUIRE(e->sld(0x400000).can_eliminate);
      return e;
    };
    {
      auto e = flagged();
      CHECK(e->on_dest_register_write(1) == 1);
      CHECK(!e->sld(0x400000).can_eliminate);
      CHECK(e->stats().flag_resets_register == 1);
      CHECK(e->rmt_list(1).empty());
    }
    {
      auto e = flagged();
      e->on_store_resolved(0x3030, 4); // same line, other bytes
      CHECK(!e->sld(0x400000).can_eliminate);
      CHECK(e->stats().flag_resets_store == 1);
      CHECK(e->amt_list(0x3008).empty());
    }
    {
      auto e = flagged();
      e->on_store_resolved(0x3040, 8); // next line
      CHECK(e->sld(0x400000).can_eliminate);
    }
    {
      auto e = flagged();
      e->on_snoop(0x3000);
      CHECK(!e->sld(0x400000).can_eliminate);
      CHECK(e->stats().flag_resets_snoop == 1);
    }
    {
      auto e = flagged();
      e->on_amt_invalidate(0x3000);
      CHECK(!e->sld(0x400000).can_eliminate);
      CHECK(e->stats().flag_resets_amt_i == 1);
    }
    {
      auto e = flagged();
      e->on_context_switch();
      CHECK(!e->sld(0x400000).can_eliminate);
      CHECK(e->sld(0x400000).confidence > 0); // kept by default
      CHECK(e->rmt_list(1).empty());
      CHECK(e->amt_list(0x3008).empty());
      CHECK(e->stats().flag_resets_context == 1);
    }
    {
      ConstableConfig c = low_threshold();
      c.context_switch_clears_confidence = true;
      auto e = flagged(c);
      e->on_context_switch();
      CHECK(e->sld(0x400000).confidence == 0);
    }
  }

  TEST_CASE("full-address AMT ignores stores to other bytes of the line") {
    ConstableConfig c = low_threshold();
    c.amt_index = AmtIndex::FullAddress;
    ConstableEngine e(c);
    Driver d{e};
    d.train(0x400000, {kRip}, 0x3008, 5);
    e.on_store_resolved(0x3000, 8); // bytes 0..7
    CHECK(e.sld(0x400000).can_eliminate);
    e.on_store_resolved(0x3010, 4);
    CHECK(e.sld(0x400000).can_eliminate);
    e.on_store_resolved(0x300f, 1); // last byte of the load
    CHECK(!e.sld(0x400000).can_eliminate);
    d.train(0x400000, {kRip}, 0x3008, 5);
    e.on_store_resolved(0x3004, 8); // straddles into the load
    CHECK(!e.sld(0x400000).can_eliminate);
    d.train(0x400000, {kRip}, 0x3008, 5);
    e.on_snoop(0x3000); // coherence stays line-granular
    CHECK(!e.sld(0x400000).can_eliminate);
  }

  TEST_CASE("RMT capacity: the oldest PC on a full list is displaced") {
    ConstableConfig c = low_threshold();
    c.rmt_other_capacity = 3;
    ConstableEngine e(c);
    Driver d{e};
    for (int p = 0; p < 4; ++p) d.train(0x400000 + 0x40 * p, {2}, 0x5000 + 64 * p, p);
    CHECK(!e.sld(0x400000).can_eliminate);
    for (int p = 1; p < 4; ++p) CHECK(e.sld(0x400000 + 0x40 * p).can_eliminate);
    CHECK(e.rmt_list(2).size() == 3);
    CHECK(e.stats().rmt_displacements == 1);
  }

  TEST_CASE("AMT capacity: a set overflow kills the LRU entry") {
    ConstableConfig c = low_threshold();
    c.amt_sets = 4;
    c.amt_ways = 2;
    ConstableEngine e(c);
    Driver d{e};
    const std::uint64_t stride = 64 * 4; // same AMT set
    for (int p = 0; p < 3; ++p) d.train(0x400000 + 0x40 * p, {kRip}, 0x10000 + stride * p, p);
    CHECK(!e.sld(0x400000).can_eliminate);
    CHECK(e.sld(0x400040).can_eliminate);
    CHECK(e.sld(0x400080).can_eliminate);
    CHECK(e.stats().amt_evictions_capacity == 1);
    CHECK(e.stats().flag_resets_capacity == 1);
  }

  TEST_CASE("AMT entry PC list overflow resets the oldest PC") {
    ConstableConfig c = low_threshold();
    c.amt_pcs_per_entry = 2;
    ConstableEngine e(c);
    Driver d{e};
    for (int p = 0; p < 3; ++p) d.train(0x400000 + 0x40 * p, {kRip}, 0x6000 + 8 * p, p);
    CHECK(!e.sld(0x400000).can_eliminate);
    CHECK(e.amt_list(0x6000).size() == 2);
    CHECK(e.stats().amt_displacements == 1);
  }

  TEST_CASE("eliminations never exceed xPRF capacity") {
    ConstableConfig c = low_threshold();
    c.xprf_size = 2;
    ConstableEngine e(c);
    Driver d{e};
    d.train(0x400000, {kRip}, 0x7000, 3);
    CHECK(e.xprf_free() == 2);
    CHECK(e.lookup_at_rename(0x400000, {kRip}, 100).decision == RenameDecision::Eliminate);
    CHECK(e.lookup_at_rename(0x400000, {kRip}, 101).decision == RenameDecision::Eliminate);
    CHECK(e.xprf_free() == 0);
    CHECK(!e.would_eliminate(0x400000));
    CHECK(e.lookup_at_rename(0x400000, {kRip}, 102).decision == RenameDecision::Normal);
    CHECK(e.stats().xprf_full_rejections == 1);
    e.release_xprf(100);
    CHECK(e.would_eliminate(0x400000));
  }

  TEST_CASE("a reset between mark and writeback keeps the flag clear") {
    ConstableEngine e(low_threshold());
    Driver d{e};
    for (int i = 0; i < 3; ++i) d.step(0x400000, {1}, 0x8000, 4);
    const LookupResult r = e.lookup_at_rename(0x400000, {1}, 50);
    REQUIRE(r.decision == RenameDecision::MarkLikelyStable);
    e.on_dest_register_write(1);
    e.on_writeback(0x400000, {1}, 0x8000, 8, 4, true, 50);
    CHECK(!e.sld(0x400000).can_eliminate);
  }

  TEST_CASE("configuration is validated") {
    ConstableConfig c;
    c.threshold = 40;
    CHECK_THROWS(c.validate());
    c = {};
    c.sld_ways = 0;
    CHECK_THROWS(c.validate());
    CHECK_NOTHROW(ConstableConfig{}.validate());
  }

  TEST_CASE("in the pipeline, spaced traces follow the sequential oracle") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      CAPTURE(seed);
      const Trace t = harness::spaced_random_trace(seed, 300);
      ConstableConfig cfg = harness::stress_config(seed);
      if (seed % 3 == 0) {
        cfg = ConstableConfig{};
        cfg.threshold = 8;
      }
      oracle::StepThrough ref(cfg);
      ref.run(t);
      ConstableEngine e(cfg);
      const SimStats s = harness::run_constable(t, e, true);
      REQUIRE(s.retired_log.size() == ref.decisions.size());
      CHECK(s.ordering_violation_flushes == 0);
      std::size_t mismatches = 0;
      for (std::size_t i = 0; i < ref.decisions.size(); ++i) {
        const auto& l = s.retired_log[i];
        REQUIRE(l.seq_no == ref.load_seq[i]);
        const bool elim = ref.decisions[i] == oracle::Decision::Eliminate;
        const bool mark = ref.decisions[i] == oracle::Decision::Mark;
        if (l.eliminated != elim || l.marked_likely_stable != mark) {
          if (mismatches++ == 0) MESSAGE("first divergence at load " << i << " seq " << l.seq_no);
        }
      }
      CHECK(mismatches == 0);
      CHECK(s.eliminated_loads == ref.eliminations);
      CHECK(s.engine.likely_stable_marks == ref.marks);
      std::unordered_map<std::uint64_t, bool> seen;
      for (const auto& r : t.records)
        if (r.is_load() && !seen[r.pc]) {
          seen[r.pc] = true;
          const SldView v = e.sld(r.pc);
          const auto c = ref.confidence(r.pc);
          CHECK(v.present == c.has_value());
          if (c) CHECK(v.confidence == *c);
        }
      CHECK(ref.eliminations > 0);
    }
  }
}
