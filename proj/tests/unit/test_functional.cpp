#include <doctest.h>

#include "constable/functional.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace constable;

TEST_SUITE("functional") {
  TEST_CASE("replay agrees with the byte-map oracle on random traces") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      const Trace t = harness::random_trace(seed, 20000);
      const FunctionalState f = replay_functional(t);
      const auto want = oracle::expected_load_values(t);
      REQUIRE(f.loads.size() == want.size());
      for (const auto& [seq, v] : want) {
        const LoadExpectation* e = f.expected(seq);
        REQUIRE(e != nullptr);
        CHECK(e->value == v);
      }
    }
  }

  TEST_CASE("partial overlaps and sub-word stores compose little-endian") {
    harness::TraceBuilder b;
    b.init(0x1000, 0x8877665544332211);
    b.store(0x10, {1}, 0x1002, 0xbbaa, 2);
    const auto s1 = b.load(0x20, 2, {1}, 0x1000);
    b.store(0x14, {1}, 0x1007, 0xcc, 1);
    const auto s2 = b.load(0x24, 2, {1}, 0x1004, 4);
    const auto s3 = b.load(0x28, 2, {1}, 0x2000, 4); // untouched memory
    const FunctionalState f = replay_functional(b.trace);
    CHECK(f.expected(s1)->value == 0x88776655bbaa2211);
    CHECK(f.expected(s2)->value == 0xcc776655);
    CHECK(f.expected(s3)->value == 0);
    CHECK(f.memory.read(0x1000, 8) == 0xcc776655bbaa2211);
  }

  TEST_CASE("replay is prefix-monotone") {
    const Trace t = harness::random_trace(3, 5000);
    const FunctionalState full = replay_functional(t);
    Trace prefix = t;
    prefix.records.resize(t.records.size() / 2);
    const FunctionalState half = replay_functional(prefix);
    for (const auto& [seq, e] : half.loads) CHECK(*full.expected(seq) == e);
  }

  TEST_CASE("generated traces pass sanity and corruption is reported") {
    Trace t = harness::random_trace(5, 10000);
    CHECK(sanity_check(t).ok());
    std::size_t hit = 0;
    for (auto& r : t.records)
      if (r.is_load() && ++hit == 100) {
        r.mem_value ^= 1;
        const SanityReport rep = sanity_check(t);
        REQUIRE(rep.violations.size() == 1);
        CHECK(rep.violations[0].seq_no == r.seq_no);
        CHECK(rep.violations[0].recorded == (rep.violations[0].expected ^ 1));
        break;
      }
  }

  TEST_CASE("memory image reads zero where untouched") {
    MemoryImage m;
    CHECK(m.read(0x123456, 8) == 0);
    m.write(0x40, 4, 0xdeadbeef);
    CHECK(m.read(0x40, 2) == 0xbeef);
    CHECK(m.read_byte(0x43) == 0xde);
    CHECK(m.touched_lines() == 1);
  }
}
