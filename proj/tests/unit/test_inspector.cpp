#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "constable/inspector.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace constable;

namespace {

void check_equal(const InspectorReport& got, const InspectorReport& want) {
  CHECK(got.profiles == want.profiles);
  CHECK(got.aggregates == want.aggregates);
}

} // namespace

TEST_SUITE("inspector") {
  TEST_CASE("mode classification follows the source-register sets") {
    CHECK(addressing_mode({kRip}) == AddressingMode::PcRel);
    CHECK(addressing_mode({kRsp}) == AddressingMode::StackRel);
    CHECK(addressing_mode({kRbp}) == AddressingMode::StackRel);
    CHECK(addressing_mode({kRsp, kRbp}) == AddressingMode::StackRel);
    CHECK(addressing_mode({kRsp, 3}) == AddressingMode::RegRel);
    CHECK(addressing_mode({kRip, 3}) == AddressingMode::RegRel);
    CHECK(addressing_mode({0}) == AddressingMode::RegRel);
    CHECK_THROWS_AS(addressing_mode({}), InspectorError);
  }

  TEST_CASE("distance bins") {
    CHECK(distance_bin(1) == DistanceBin::Near);
    CHECK(distance_bin(49) == DistanceBin::Near);
    CHECK(distance_bin(50) == DistanceBin::Mid);
    CHECK(distance_bin(250) == DistanceBin::Mid);
    CHECK(distance_bin(251) == DistanceBin::Far);
  }

  TEST_CASE("canonical fixtures: one stable PC per mode") {
    const std::pair<const char*, AddressingMode> cases[] = {
        {"pc_rel", AddressingMode::PcRel}, {"stack_rel", AddressingMode::StackRel}, {"reg_rel", AddressingMode::RegRel}};
    for (const auto& [name, mode] : cases) {
      CAPTURE(name);
      const Trace t = read_trace(std::string(FIXTURE_DIR "/mode_") + name + ".trace");
      const InspectorReport r = analyze(t);
      check_equal(r, oracle::reference_analyze(t));
      // Hand-counted: stable at 0, 10, 110, 400; the other PC at 5 and 6.
      REQUIRE(r.profiles.size() == 2);
      const auto& s = r.profiles.at(0x401000);
      CHECK(s.is_global_stable);
      CHECK(s.mode == mode);
      CHECK(s.dynamic_count == 4);
      CHECK(s.distance_histogram == std::array<std::uint64_t, 3>{1, 1, 1});
      CHECK(s.median_distance == 100);
      CHECK(s.stable_paddr == 0x1000);
      CHECK(s.stable_value == 0xdeadbeef);
      const auto& o = r.profiles.at(0x402000);
      CHECK(!o.is_global_stable);
      CHECK(o.dynamic_count == 2);
      CHECK(o.median_distance == 1);
      const auto& a = r.aggregates;
      CHECK(a.dynamic_loads == 6);
      CHECK(a.global_stable_dynamic_loads == 4);
      CHECK(a.global_stable_dynamic_fraction == doctest::Approx(4.0 / 6.0));
      CHECK(a.mode_breakdown[static_cast<int>(mode)] == 1.0);
      for (int b = 0; b < 3; ++b) CHECK(a.distance_breakdown[b] == doctest::Approx(1.0 / 3.0));
      const auto& row = a.per_mode_distance_breakdown[static_cast<int>(mode)];
      for (int b = 0; b < 3; ++b) CHECK(row[b] == doctest::Approx(1.0 / 3.0));
    }
  }

  TEST_CASE("analyze equals the two-pass reference on random traces") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) check_equal(analyze(harness::random_trace(seed, 10000)), oracle::reference_analyze(harness::random_trace(seed, 10000)));
  }

  TEST_CASE("aggregate invariants") {
    const Trace t = harness::random_trace(7, 30000);
    const InspectorReport r = analyze(t);
    double modes = 0;
    for (double m : r.aggregates.mode_breakdown) modes += m;
    CHECK(modes == doctest::Approx(1.0));
    std::uint64_t bins = 0, reoccur = 0;
    for (const auto& [pc, p] : r.profiles) {
      for (auto b : p.distance_histogram) bins += b;
      reoccur += p.dynamic_count - 1;
    }
    CHECK(bins == reoccur);
    CHECK(r.global_stable_pcs().size() > 0);
    for (auto pc : r.global_stable_pcs()) CHECK(r.profiles.at(pc).is_global_stable);
  }

  TEST_CASE("non-load records only matter through distances") {
    harness::TraceBuilder a, b;
    a.init(0x1000, 5);
    b.init(0x1000, 5);
    for (int i = 0; i < 5; ++i) {
      a.load(0x10, 1, {kRip}, 0x1000);
      a.alu(0x20, 2, {});
      b.load(0x10, 1, {kRip}, 0x1000);
      b.snoop(0x5000);
      b.store(0x30, {3}, 0x9000, 1);
    }
    // Snoops are not instructions; stores are, like the ALU in `a`.
    const auto pa = analyze(a.trace).profiles.at(0x10), pb = analyze(b.trace).profiles.at(0x10);
    CHECK(pa.distance_histogram == pb.distance_histogram);
    CHECK(pa.median_distance == pb.median_distance);
    CHECK(pa.median_distance == 2);
  }

  TEST_CASE("CSV and JSON exports carry every profile") {
    const Trace t = read_trace(FIXTURE_DIR "/small.trace");
    const InspectorReport r = analyze(t);
    const auto j = nlohmann::json::parse(format_report(r, ReportFormat::Json));
    CHECK(j.at("profiles").size() == r.profiles.size());
    CHECK(j.at("aggregates").at("dynamic_loads").get<std::uint64_t>() == r.aggregates.dynamic_loads);
    std::istringstream csv(format_report(r, ReportFormat::Csv));
    std::string line;
    std::size_t rows = 0;
    std::getline(csv, line);
    CHECK(line.rfind("pc,", 0) == 0);
    while (std::getline(csv, line) && !line.empty() && line[0] != '#') ++rows;
    CHECK(rows == r.profiles.size());
  }
}
