#include "constable/scenarios.hpp"

#include <random>
#include <string>

#include "constable/memory_image.hpp"

namespace constable {

namespace {

constexpr std::uint64_t kData = 0x100000;
constexpr std::uint64_t kStream = 0x2000000;
constexpr std::uint64_t kFar = 0x10000000;
constexpr std::uint64_t kLoadPc = 0x401000;
constexpr std::uint64_t kStorePc = 0x402000;
constexpr std::uint64_t kPadPc = 0x403000;
constexpr std::uint64_t kMiscPc = 0x404000;

class Builder {
public:
  explicit Builder(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t random_value() {
    std::uint64_t v = rng_();
    return v == 0 ? 1 : v;
  }

  void init(std::uint64_t addr, std::uint64_t value) {
    InitChunk c;
    c.paddr = addr;
    for (int i = 0; i < 8; ++i) c.bytes.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    mem_.apply(c);
    t_.init.push_back(std::move(c));
  }

  void load(std::uint64_t pc, RegId dst, SourceRegs src, std::uint64_t addr, std::uint8_t size = 8) {
    t_.records.push_back(TraceRecord::load(seq_++, pc, dst, src, addr, size, mem_.read(addr, size)));
  }
  void store(std::uint64_t pc, SourceRegs src, std::uint64_t addr, std::uint64_t value, std::uint8_t size = 8) {
    mem_.write(addr, size, value);
    t_.records.push_back(TraceRecord::store(seq_++, pc, src, addr, size, value));
  }
  void alu(std::uint64_t pc, RegId dst, SourceRegs src) { t_.records.push_back(TraceRecord::alu(seq_++, pc, dst, src)); }

  // Independent ALU ops writing regs 6..15 only.
  void pad(std::uint32_t n = kScenarioSpacing) {
    for (std::uint32_t i = 0; i < n; ++i)
      alu(kPadPc + 4 * (i % 32), static_cast<RegId>(6 + i % 10), {});
  }

  void snoop(std::uint64_t addr) { t_.records.push_back(TraceRecord::snoop(seq_++, line_of(addr))); }
  void context_switch() { t_.records.push_back(TraceRecord::context_switch(seq_++)); }

  void expect(const std::string& kv) { t_.comments.push_back(" expect " + kv); }
  void note(const std::string& s) { t_.comments.push_back(" " + s); }

  Trace finish() { return std::move(t_); }

private:
  std::mt19937_64 rng_;
  MemoryImage mem_;
  Trace t_;
  std::uint64_t seq_ = 0;
};

std::string kv(const char* k, std::uint64_t v) { return std::string(k) + "=" + std::to_string(v); }

// Threshold 30: instance 32 is marked, 33 onward are eliminated.
constexpr std::uint64_t kTrain = 32;

Trace pure_stable(std::uint64_t seed) {
  Builder b(seed);
  const std::uint64_t addr = kData + 0x48;
  b.init(addr, b.random_value());
  for (int i = 0; i < 100; ++i) {
    b.load(kLoadPc, 6, {kRip}, addr);
    b.pad();
  }
  b.note("scenario pure_stable");
  b.expect(kv("eliminations", 100 - kTrain) + " " + kv("likely_stable_marks", 1) + " " + kv("flushes", 0));
  return b.finish();
}

// One store between instances 50 and 51. A value change halves confidence
// (15) and costs 15 more matches; a silent store only withdraws the flag.
Trace store_between(std::uint64_t seed, bool silent) {
  Builder b(seed);
  const std::uint64_t addr = kData + 0x80;
  const std::uint64_t v = b.random_value();
  b.init(addr, v);
  for (int i = 1; i <= 100; ++i) {
    b.load(kLoadPc, 6, {kRip}, addr);
    b.pad(kScenarioSpacing / 2);
    if (i == 50) b.store(kStorePc, {1}, addr, silent ? v : v ^ 0x5a5a);
    b.pad(kScenarioSpacing / 2);
  }
  b.note(silent ? "scenario silent_store" : "scenario store_invalidate");
  // 33..50 eliminated, 51 marked; silent: 52..100, else 67 marked, 68..100.
  const std::uint64_t elim = silent ? 18 + 49 : 18 + 33;
  b.expect(kv("eliminations", elim) + " " + kv("flag_resets_store", 1) + " " + kv("flushes", 0) + " " +
           kv("likely_stable_marks", silent ? 2 : 3));
  return b.finish();
}

// A store whose address waits on a memory miss, followed at once by an
// eliminated instance of the load it overwrites. Resolution flushes it.
Trace ordering_violation(std::uint64_t seed) {
  Builder b(seed);
  const std::uint64_t addr = kData + 0x100;
  const std::uint64_t v = b.random_value();
  b.init(addr, v);
  for (int i = 1; i <= 40; ++i) {
    b.load(kLoadPc, 6, {kRip}, addr);
    b.pad();
  }
  b.load(kMiscPc, 7, {kRip}, kFar + 0x40); // cold line: ~200 cycles
  b.store(kStorePc, {7}, addr, v + 1);
  b.load(kLoadPc, 6, {kRip}, addr); // instance 41, the violating load
  b.pad();
  for (int i = 42; i <= 70; ++i) {
    b.load(kLoadPc, 6, {kRip}, addr);
    b.pad();
  }
  b.note("scenario ordering_violation: instance 41 is squashed and replayed");
  // 33..40 eliminated; 41 retires with v+1 and confidence 31 -> 15;
  // 42..56 retrain, 57 marked, 58..70 eliminated.
  b.expect(kv("flushes", 1) + " " + kv("eliminations", 8 + 13) + " " + kv("squashed_eliminations", 1) + " " +
           kv("violating_instance", 41) + " " + kv("confidence_after_flush", 15));
  return b.finish();
}

// Eight stable PCs on separate lines; between rounds a 1024-line stream
// pushes every one of them out of the L1-D with clean evictions.
Trace amt_capacity_thrash(std::uint64_t seed) {
  Builder b(seed);
  constexpr int kPcs = 8, kRounds = 48, kStreamLines = 1024;
  for (int p = 0; p < kPcs; ++p) b.init(kData + 0x1000 + 64 * p, b.random_value());
  std::uint64_t next_line = 0;
  for (int r = 0; r < kRounds; ++r) {
    for (int p = 0; p < kPcs; ++p) b.load(kLoadPc + 0x10 * p, static_cast<RegId>(6 + p), {kRip}, kData + 0x1000 + 64 * p);
    for (int s = 0; s < kStreamLines; ++s) {
      b.load(kMiscPc + 4 * (s % 64), 15, {1}, kStream + 64 * (next_line++ % kStreamLines));
    }
  }
  b.note("scenario amt_capacity_thrash");
  // Pinned: 33..48 of every PC. AMT-I: each flag dies with its line before
  // the next round, so no instance is ever eliminated.
  b.expect(kv("eliminations", kPcs * (kRounds - kTrain)) + " " + kv("eliminations_amt_i", 0));
  return b.finish();
}

// Ten stable PCs hang off register 0 (capacity 8): every mark displaces a
// flagged PC before its next instance. Eight on register 1 fit.
Trace rmt_overflow(std::uint64_t seed) {
  Builder b(seed);
  constexpr int kOver = 10, kFit = 8, kRounds = 48;
  for (int p = 0; p < kOver + kFit; ++p) b.init(kData + 0x2000 + 64 * p, b.random_value());
  for (int r = 0; r < kRounds; ++r) {
    for (int p = 0; p < kOver + kFit; ++p) {
      const RegId base = p < kOver ? 0 : 1;
      b.load(kLoadPc + 0x10 * p, static_cast<RegId>(6 + p % 10), {base}, kData + 0x2000 + 64 * p);
    }
    b.pad();
  }
  b.note("scenario rmt_overflow");
  b.expect(kv("eliminations", kFit * (kRounds - kTrain)) + " " + kv("eliminations_reg0", 0));
  return b.finish();
}

// Store to byte 0 about 60 instructions ahead of each load of byte 8.
Trace false_sharing(std::uint64_t seed) {
  Builder b(seed);
  const std::uint64_t line = kData + 0x3000;
  b.init(line, b.random_value());
  b.init(line + 8, b.random_value());
  constexpr int kTrainRounds = 40, kStoreRounds = 30;
  for (int i = 0; i < kTrainRounds; ++i) {
    b.load(kLoadPc, 6, {kRip}, line + 8);
    b.pad();
  }
  for (int i = 0; i < kStoreRounds; ++i) {
    b.store(kStorePc, {1}, line, b.random_value());
    b.pad(60);
    b.load(kLoadPc, 6, {kRip}, line + 8);
    b.pad(kScenarioSpacing - 60);
  }
  b.note("scenario false_sharing");
  b.expect(kv("eliminations", kTrainRounds - kTrain) + " " + kv("eliminations_full", kTrainRounds - kTrain + kStoreRounds) +
           " " + kv("flag_resets_store", kStoreRounds) + " " + kv("flushes", 0));
  return b.finish();
}

// Four stable PCs; once trained, every round snoops PC 0's line and a line
// this core never touched.
Trace snoop_storm(std::uint64_t seed) {
  Builder b(seed);
  constexpr int kPcs = 4, kTrainRounds = 40, kStormRounds = 20;
  for (int p = 0; p < kPcs; ++p) b.init(kData + 0x4000 + 64 * p, b.random_value());
  auto round = [&] {
    for (int p = 0; p < kPcs; ++p) b.load(kLoadPc + 0x10 * p, static_cast<RegId>(6 + p), {kRip}, kData + 0x4000 + 64 * p);
    b.pad();
  };
  for (int r = 0; r < kTrainRounds; ++r) round();
  for (int r = 0; r < kStormRounds; ++r) {
    b.snoop(kData + 0x4000);
    b.snoop(kData + 0x9000 + 64 * r);
    b.pad(16);
    round();
  }
  b.note("scenario snoop_storm");
  const std::uint64_t elim = kPcs * (kTrainRounds - kTrain) + (kPcs - 1) * kStormRounds;
  b.expect(kv("eliminations", elim) + " " + kv("snoops_delivered", kStormRounds) + " " +
           kv("snoops_filtered", kStormRounds) + " " + kv("flag_resets_snoop", kStormRounds));
  return b.finish();
}

// 20 distinct PC-relative loads back to back need ceil(20/3) = 7 rename
// cycles of 3 SLD reads; 6 of those end short of the group. Later, three
// flagged RSP-based PCs are reset by one RSP write: 3 writes, 2 ports.
Trace sld_port_pressure(std::uint64_t seed) {
  Builder b(seed);
  for (int p = 0; p < 20; ++p) b.init(kData + 0x5000 + 64 * p, b.random_value());
  for (int p = 0; p < 3; ++p) b.init(kData + 0x6000 + 64 * p, b.random_value());
  for (int p = 0; p < 20; ++p) b.load(kMiscPc + 0x10 * p, static_cast<RegId>(6 + p % 10), {kRip}, kData + 0x5000 + 64 * p);
  b.pad();
  auto round = [&] {
    for (int p = 0; p < 3; ++p) b.load(kLoadPc + 0x10 * p, static_cast<RegId>(6 + p), {kRsp}, kData + 0x6000 + 64 * p);
    b.pad();
  };
  constexpr int kTrainRounds = 40, kAfter = 5;
  for (int r = 0; r < kTrainRounds; ++r) round();
  b.alu(kStorePc, kRsp, {kRsp});
  b.pad();
  for (int r = 0; r < kAfter; ++r) round();
  b.note("scenario sld_port_pressure");
  b.expect(kv("read_stalls", 6) + " " + kv("write_stalls", 1) + " " +
           kv("eliminations", 3 * (kTrainRounds - kTrain) + 3 * (kAfter - 1)) + " " + kv("flag_resets_register", 3));
  return b.finish();
}

// X, ten rounds, X X, ten rounds. Confidence survives; each X costs one mark.
Trace context_switch(std::uint64_t seed) {
  Builder b(seed);
  constexpr int kPcs = 2, kTrainRounds = 40, kRounds = 10;
  for (int p = 0; p < kPcs; ++p) b.init(kData + 0x7000 + 64 * p, b.random_value());
  auto round = [&] {
    for (int p = 0; p < kPcs; ++p) b.load(kLoadPc + 0x10 * p, static_cast<RegId>(6 + p), {kRip}, kData + 0x7000 + 64 * p);
    b.pad();
  };
  for (int r = 0; r < kTrainRounds; ++r) round();
  b.context_switch();
  for (int r = 0; r < kRounds; ++r) round();
  b.context_switch();
  b.context_switch();
  for (int r = 0; r < kRounds; ++r) round();
  b.note("scenario context_switch");
  const std::uint64_t elim = kPcs * ((kTrainRounds - kTrain) + 2 * (kRounds - 1));
  b.expect(kv("eliminations", elim) + " " + kv("context_switches", 3) + " " + kv("flag_resets_context", 2 * kPcs));
  return b.finish();
}

// Stable-heavy and load-port bound: per iteration one global-stable load
// feeding a loop-carried chain, four loads whose addresses hang off that
// chain, one spare ALU op. Every 100 iterations another core writes the line
// of the next stable load (a remote write to bytes it never reads), so that
// load misses to memory unless its data fetch is skipped.
Trace port_bound(std::uint64_t seed) {
  Builder b(seed);
  constexpr int kStablePcs = 8, kIters = 6000, kDyn = 4, kSnoopEvery = 100, kDynLines = 256;
  constexpr RegId kAcc = 10;
  for (int p = 0; p < kStablePcs; ++p) b.init(kData + 0x8000 + 64 * p, b.random_value());
  std::uint64_t dyn = 0;
  for (int it = 0; it < kIters; ++it) {
    if (it % kSnoopEvery == 0) b.snoop(kData + 0x8000 + 64 * ((it + 1) % kStablePcs));
    const int p = it % kStablePcs;
    b.load(kLoadPc + 0x10 * p, 6, {kRip}, kData + 0x8000 + 64 * p);
    b.alu(kMiscPc, kAcc, {kAcc, 6});
    for (int d = 0; d < kDyn; ++d) b.load(kMiscPc + 0x100 + 4 * d, 14, {kAcc}, kStream + 64 * (dyn++ % kDynLines));
    b.alu(kMiscPc + 0x200, 7, {});
  }
  b.note("scenario port_bound");
  b.expect(kv("stable_loads", kIters) + " " + kv("loads", kIters * (1 + kDyn)) + " " +
           kv("snoops", kIters / kSnoopEvery));
  return b.finish();
}

} // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"pure_stable",   "store_invalidate", "silent_store",  "ordering_violation",
                                                 "amt_capacity_thrash", "rmt_overflow", "false_sharing", "snoop_storm",
                                                 "sld_port_pressure",   "context_switch", "port_bound"};
  return names;
}

Trace generate_scenario(const std::string& name, std::uint64_t seed) {
  if (name == "pure_stable") return pure_stable(seed);
  if (name == "store_invalidate") return store_between(seed, false);
  if (name == "silent_store") return store_between(seed, true);
  if (name == "ordering_violation") return ordering_violation(seed);
  if (name == "amt_capacity_thrash") return amt_capacity_thrash(seed);
  if (name == "rmt_overflow") return rmt_overflow(seed);
  if (name == "false_sharing") return false_sharing(seed);
  if (name == "snoop_storm") return snoop_storm(seed);
  if (name == "sld_port_pressure") return sld_port_pressure(seed);
  if (name == "context_switch") return context_switch(seed);
  if (name == "port_bound") return port_bound(seed);
  throw UnknownScenario("unknown scenario: " + name);
}

} // namespace constable
