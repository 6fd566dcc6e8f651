#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace constable {

using RegId = std::uint8_t;

// x86-64 GPR ids 0-15 plus RIP.
inline constexpr RegId kRsp = 4;
inline constexpr RegId kRbp = 5;
inline constexpr RegId kRip = 16;
inline constexpr RegId kNumArchRegs = 17;
inline constexpr RegId kNoReg = 0xff;

inline constexpr std::uint64_t kLineBytes = 64;
inline constexpr std::uint64_t kAddrMask48 = (std::uint64_t{1} << 48) - 1;

constexpr std::uint64_t line_of(std::uint64_t paddr) { return paddr & ~(kLineBytes - 1); }

enum class RecordKind : std::uint8_t { Instruction, Snoop, ContextSwitch };
enum class OpClass : std::uint8_t { Load, Store, Alu, Branch, Other };

char op_class_code(OpClass op);

/// Up to three source registers, order preserved as written in the trace.
class SourceRegs {
public:
  SourceRegs() = default;
  SourceRegs(std::initializer_list<RegId> regs);

  void push(RegId r);
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  RegId operator[](std::size_t i) const { return regs_[i]; }
  const RegId* begin() const { return regs_.data(); }
  const RegId* end() const { return regs_.data() + count_; }
  bool contains(RegId r) const;

  friend bool operator==(const SourceRegs& a, const SourceRegs& b) {
    if (a.count_ != b.count_) return false;
    for (std::size_t i = 0; i < a.count_; ++i)
      if (a.regs_[i] != b.regs_[i]) return false;
    return true;
  }

private:
  std::array<RegId, 3> regs_{};
  std::uint8_t count_ = 0;
};

/// One dynamic micro-op, snoop event, or context-switch directive.
struct TraceRecord {
  RecordKind kind = RecordKind::Instruction;
  std::uint64_t seq_no = 0;
  std::uint64_t pc = 0;
  OpClass op = OpClass::Alu;
  SourceRegs src;
  RegId dst = kNoReg;
  std::uint64_t mem_vaddr = 0;
  std::uint64_t mem_paddr = 0;
  std::uint8_t mem_size = 0;
  std::uint64_t mem_value = 0;
  std::uint64_t snoop_paddr = 0;

  bool is_instruction() const { return kind == RecordKind::Instruction; }
  bool is_load() const { return is_instruction() && op == OpClass::Load; }
  bool is_store() const { return is_instruction() && op == OpClass::Store; }
  bool is_mem() const { return is_load() || is_store(); }
  bool has_dst() const { return dst != kNoReg; }

  bool operator==(const TraceRecord&) const = default;

  static TraceRecord alu(std::uint64_t seq, std::uint64_t pc, RegId dst, SourceRegs src);
  static TraceRecord branch(std::uint64_t seq, std::uint64_t pc, SourceRegs src);
  static TraceRecord load(std::uint64_t seq, std::uint64_t pc, RegId dst, SourceRegs src,
                          std::uint64_t paddr, std::uint8_t size, std::uint64_t value);
  static TraceRecord store(std::uint64_t seq, std::uint64_t pc, SourceRegs src,
                           std::uint64_t paddr, std::uint8_t size, std::uint64_t value);
  static TraceRecord snoop(std::uint64_t seq, std::uint64_t line);
  static TraceRecord context_switch(std::uint64_t seq);
};

/// Initial memory contents declared in the header (`#init`).
struct InitChunk {
  std::uint64_t paddr = 0;
  std::vector<std::uint8_t> bytes;
  bool operator==(const InitChunk&) const = default;
};

/// A fully materialized trace. `comments` holds free-form `#` lines (without
/// the leading '#'), which scenario traces use for `expect` metadata.
struct Trace {
  std::vector<InitChunk> init;
  std::vector<TraceRecord> records;
  std::vector<std::string> comments;

  bool operator==(const Trace&) const = default;
};

enum class TraceErrorKind { MalformedLine, UnsupportedVersion, NonMonotonicSeqNo, IoFailure };

class TraceError : public std::runtime_error {
public:
  TraceError(TraceErrorKind kind, std::size_t line_no, const std::string& what);
  TraceErrorKind kind() const { return kind_; }
  std::size_t line_no() const { return line_no_; }

private:
  TraceErrorKind kind_;
  std::size_t line_no_;
};

inline constexpr std::string_view kTraceHeader = "#constable-trace v1";

/// Streaming reader. Header and `#init` lines are consumed by the
/// constructor; records are parsed on demand by next().
class TraceReader {
public:
  explicit TraceReader(const std::string& path);
  explicit TraceReader(std::unique_ptr<std::istream> in);

  const std::vector<InitChunk>& init() const { return init_; }
  /// Comments seen so far; complete only once next() has returned nullopt.
  const std::vector<std::string>& comments() const { return comments_; }

  std::optional<TraceRecord> next();

private:
  void read_header();
  bool fetch_line();
  TraceRecord parse_record(std::string_view line);

  std::unique_ptr<std::istream> in_;
  std::vector<InitChunk> init_;
  std::vector<std::string> comments_;
  std::string line_;
  bool have_line_ = false;
  std::size_t line_no_ = 0;
  std::optional<std::uint64_t> last_seq_;
};

Trace read_trace(const std::string& path);
Trace parse_trace(const std::string& text);

void write_trace(const Trace& trace, std::ostream& out);
void write_trace(const Trace& trace, const std::string& path);
std::string format_trace(const Trace& trace);

/// Parses `key=value` tokens from comments of the form `expect k=v k=v`.
std::optional<std::uint64_t> trace_expectation(const Trace& trace, std::string_view key);

std::string hex(std::uint64_t v);

} // namespace constable
