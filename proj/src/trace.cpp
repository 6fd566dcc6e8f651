#include "constable/trace.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace constable {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view rstrip(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_u64(std::string_view tok, int base, std::uint64_t& out) {
  if (base == 16 && tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X'))
    tok.remove_prefix(2);
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out, base);
  return ec == std::errc{} && ptr == tok.data() + tok.size();
}

bool valid_size(std::uint64_t s) { return s == 1 || s == 2 || s == 4 || s == 8; }

std::uint64_t size_mask(unsigned size) {
  return size >= 8 ? ~std::uint64_t{0} : ((std::uint64_t{1} << (8 * size)) - 1);
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

} // namespace

char op_class_code(OpClass op) {
  switch (op) {
  case OpClass::Load: return 'L';
  case OpClass::Store: return 'S';
  case OpClass::Alu: return 'A';
  case OpClass::Branch: return 'B';
  case OpClass::Other: return 'O';
  }
  return '?';
}

SourceRegs::SourceRegs(std::initializer_list<RegId> regs) {
  for (RegId r : regs) push(r);
}

void SourceRegs::push(RegId r) {
  if (count_ >= regs_.size()) throw std::length_error("at most three source registers");
  regs_[count_++] = r;
}

bool SourceRegs::contains(RegId r) const {
  for (RegId x : *this)
    if (x == r) return true;
  return false;
}

TraceRecord TraceRecord::alu(std::uint64_t seq, std::uint64_t pc, RegId dst, SourceRegs src) {
  TraceRecord r;
  r.seq_no = seq;
  r.pc = pc;
  r.op = OpClass::Alu;
  r.dst = dst;
  r.src = src;
  return r;
}

TraceRecord TraceRecord::branch(std::uint64_t seq, std::uint64_t pc, SourceRegs src) {
  TraceRecord r;
  r.seq_no = seq;
  r.pc = pc;
  r.op = OpClass::Branch;
  r.src = src;
  return r;
}

TraceRecord TraceRecord::load(std::uint64_t seq, std::uint64_t pc, RegId dst, SourceRegs src,
                              std::uint64_t paddr, std::uint8_t size, std::uint64_t value) {
  TraceRecord r;
  r.seq_no = seq;
  r.pc = pc;
  r.op = OpClass::Load;
  r.dst = dst;
  r.src = src;
  r.mem_vaddr = paddr;
  r.mem_paddr = paddr;
  r.mem_size = size;
  r.mem_value = value;
  return r;
}

TraceRecord TraceRecord::store(std::uint64_t seq, std::uint64_t pc, SourceRegs src,
                               std::uint64_t paddr, std::uint8_t size, std::uint64_t value) {
  TraceRecord r = load(seq, pc, kNoReg, src, paddr, size, value);
  r.op = OpClass::Store;
  return r;
}

TraceRecord TraceRecord::snoop(std::uint64_t seq, std::uint64_t line) {
  TraceRecord r;
  r.kind = RecordKind::Snoop;
  r.seq_no = seq;
  r.op = OpClass::Other;
  r.snoop_paddr = line;
  return r;
}

TraceRecord TraceRecord::context_switch(std::uint64_t seq) {
  TraceRecord r;
  r.kind = RecordKind::ContextSwitch;
  r.seq_no = seq;
  r.op = OpClass::Other;
  return r;
}

TraceError::TraceError(TraceErrorKind kind, std::size_t line_no, const std::string& what)
    : std::runtime_error(what), kind_(kind), line_no_(line_no) {}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Reader

TraceReader::TraceReader(const std::string& path) {
  auto f = std::make_unique<std::ifstream>(path);
  if (!*f) throw TraceError(TraceErrorKind::IoFailure, 0, "cannot open trace file: " + path);
  in_ = std::move(f);
  read_header();
}

TraceReader::TraceReader(std::unique_ptr<std::istream> in) : in_(std::move(in)) { read_header(); }

bool TraceReader::fetch_line() {
  if (!std::getline(*in_, line_)) return false;
  ++line_no_;
  return true;
}

void TraceReader::read_header() {
  if (!fetch_line())
    throw TraceError(TraceErrorKind::MalformedLine, 1, "line 1: missing trace header");
  std::string_view first = rstrip(line_);
  if (first != kTraceHeader) {
    if (first.substr(0, 16) == "#constable-trace")
      throw TraceError(TraceErrorKind::UnsupportedVersion, 1,
                       "line 1: unsupported trace version: " + std::string(first));
    throw TraceError(TraceErrorKind::MalformedLine, 1, "line 1: missing trace header");
  }
  // Header section: #init and comment lines until the first record.
  while (fetch_line()) {
    std::string_view l = rstrip(line_);
    if (l.empty()) continue;
    if (l[0] != '#') {
      have_line_ = true;
      return;
    }
    if (l.substr(0, 6) == "#init ") {
      auto tok = split_ws(l.substr(6));
      InitChunk chunk;
      if (tok.size() != 2 || !parse_u64(tok[0], 16, chunk.paddr) || tok[1].size() % 2 != 0 ||
          chunk.paddr > kAddrMask48)
        throw TraceError(TraceErrorKind::MalformedLine, line_no_,
                         "line " + std::to_string(line_no_) + ": malformed #init");
      for (std::size_t i = 0; i < tok[1].size(); i += 2) {
        int hi = hex_digit(tok[1][i]), lo = hex_digit(tok[1][i + 1]);
        if (hi < 0 || lo < 0)
          throw TraceError(TraceErrorKind::MalformedLine, line_no_,
                           "line " + std::to_string(line_no_) + ": malformed #init bytes");
        chunk.bytes.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
      }
      init_.push_back(std::move(chunk));
    } else {
      comments_.emplace_back(l.substr(1));
    }
  }
}

std::optional<TraceRecord> TraceReader::next() {
  for (;;) {
    if (!have_line_ && !fetch_line()) return std::nullopt;
    have_line_ = false;
    std::string_view l = rstrip(line_);
    if (l.empty()) continue;
    if (l[0] == '#') {
      if (l.substr(0, 6) == "#init ")
        throw TraceError(TraceErrorKind::MalformedLine, line_no_,
                         "line " + std::to_string(line_no_) + ": #init after first record");
      comments_.emplace_back(l.substr(1));
      continue;
    }
    TraceRecord rec = parse_record(l);
    if (last_seq_ && rec.seq_no <= *last_seq_)
      throw TraceError(TraceErrorKind::NonMonotonicSeqNo, line_no_,
                       "line " + std::to_string(line_no_) + ": seq_no " +
                           std::to_string(rec.seq_no) + " does not increase");
    last_seq_ = rec.seq_no;
    return rec;
  }
}

TraceRecord TraceReader::parse_record(std::string_view line) {
  auto bad = [&](const char* why) {
    return TraceError(TraceErrorKind::MalformedLine, line_no_,
                      "line " + std::to_string(line_no_) + ": " + why);
  };
  auto tok = split_ws(line);
  if (tok.empty() || tok[0].size() != 1) throw bad("unknown record type");
  TraceRecord r;
  const char type = tok[0][0];
  if (type == 'N') {
    if (tok.size() != 3) throw bad("snoop record needs seq and paddr");
    r.kind = RecordKind::Snoop;
    r.op = OpClass::Other;
    if (!parse_u64(tok[1], 10, r.seq_no) || !parse_u64(tok[2], 16, r.snoop_paddr))
      throw bad("bad snoop fields");
    if (r.snoop_paddr > kAddrMask48 || line_of(r.snoop_paddr) != r.snoop_paddr)
      throw bad("snoop address must be a 48-bit cacheline address");
    return r;
  }
  if (type == 'X') {
    if (tok.size() != 2 || !parse_u64(tok[1], 10, r.seq_no)) throw bad("bad context-switch record");
    r.kind = RecordKind::ContextSwitch;
    r.op = OpClass::Other;
    return r;
  }
  if (type != 'I') throw bad("unknown record type");
  if (tok.size() < 6) throw bad("instruction record too short");
  if (!parse_u64(tok[1], 10, r.seq_no)) throw bad("bad seq_no");
  if (!parse_u64(tok[2], 16, r.pc) || r.pc > kAddrMask48) throw bad("bad pc");
  if (tok[3].size() != 1) throw bad("bad op class");
  switch (tok[3][0]) {
  case 'L': r.op = OpClass::Load; break;
  case 'S': r.op = OpClass::Store; break;
  case 'A': r.op = OpClass::Alu; break;
  case 'B': r.op = OpClass::Branch; break;
  case 'O': r.op = OpClass::Other; break;
  default: throw bad("bad op class");
  }
  if (tok[4] != "-") {
    std::uint64_t d;
    if (!parse_u64(tok[4], 10, d) || d >= kRip) throw bad("bad destination register");
    r.dst = static_cast<RegId>(d);
  }
  if (tok[5] != "-") {
    std::string_view s = tok[5];
    while (!s.empty()) {
      auto comma = s.find(',');
      std::string_view one = s.substr(0, comma);
      std::uint64_t reg;
      if (!parse_u64(one, 10, reg) || reg > kRip) throw bad("bad source register");
      if (r.src.size() == 3) throw bad("more than three source registers");
      r.src.push(static_cast<RegId>(reg));
      if (comma == std::string_view::npos) break;
      s.remove_prefix(comma + 1);
      if (s.empty()) throw bad("trailing comma in source list");
    }
  }
  const bool mem = r.op == OpClass::Load || r.op == OpClass::Store;
  if (!mem) {
    if (tok.size() != 6) throw bad("unexpected memory fields on non-memory op");
    if (r.op == OpClass::Branch && r.has_dst()) throw bad("branch with destination");
    return r;
  }
  if (tok.size() != 10) throw bad("memory op needs vaddr paddr size value");
  if (r.op == OpClass::Store && r.has_dst()) throw bad("store with destination");
  std::uint64_t size = 0;
  if (!parse_u64(tok[6], 16, r.mem_vaddr) || !parse_u64(tok[7], 16, r.mem_paddr) ||
      !parse_u64(tok[8], 10, size) || !parse_u64(tok[9], 16, r.mem_value))
    throw bad("bad memory fields");
  if (!valid_size(size)) throw bad("memory size must be 1, 2, 4 or 8");
  r.mem_size = static_cast<std::uint8_t>(size);
  if (r.mem_vaddr > kAddrMask48 || r.mem_paddr > kAddrMask48) throw bad("address exceeds 48 bits");
  if (line_of(r.mem_paddr) != line_of(r.mem_paddr + size - 1))
    throw bad("memory access crosses a cacheline boundary");
  if ((r.mem_value & ~size_mask(r.mem_size)) != 0) throw bad("value wider than access size");
  return r;
}

Trace read_trace(const std::string& path) {
  TraceReader reader(path);
  Trace t;
  while (auto rec = reader.next()) t.records.push_back(*rec);
  t.init = reader.init();
  t.comments = reader.comments();
  return t;
}

Trace parse_trace(const std::string& text) {
  TraceReader reader(std::make_unique<std::istringstream>(text));
  Trace t;
  while (auto rec = reader.next()) t.records.push_back(*rec);
  t.init = reader.init();
  t.comments = reader.comments();
  return t;
}

// ---------------------------------------------------------------------------
// Writer

namespace {

void write_record(const TraceRecord& r, std::string& out) {
  char buf[160];
  switch (r.kind) {
  case RecordKind::Snoop:
    std::snprintf(buf, sizeof buf, "N %llu %llx\n", static_cast<unsigned long long>(r.seq_no),
                  static_cast<unsigned long long>(r.snoop_paddr));
    out += buf;
    return;
  case RecordKind::ContextSwitch:
    std::snprintf(buf, sizeof buf, "X %llu\n", static_cast<unsigned long long>(r.seq_no));
    out += buf;
    return;
  case RecordKind::Instruction: break;
  }
  std::snprintf(buf, sizeof buf, "I %llu %llx %c ", static_cast<unsigned long long>(r.seq_no),
                static_cast<unsigned long long>(r.pc), op_class_code(r.op));
  out += buf;
  if (r.has_dst())
    out += std::to_string(r.dst);
  else
    out += '-';
  out += ' ';
  if (r.src.empty()) {
    out += '-';
  } else {
    for (std::size_t i = 0; i < r.src.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(r.src[i]);
    }
  }
  if (r.is_mem()) {
    std::snprintf(buf, sizeof buf, " %llx %llx %u %llx", static_cast<unsigned long long>(r.mem_vaddr),
                  static_cast<unsigned long long>(r.mem_paddr), static_cast<unsigned>(r.mem_size),
                  static_cast<unsigned long long>(r.mem_value));
    out += buf;
  }
  out += '\n';
}

} // namespace

std::string format_trace(const Trace& trace) {
  std::string out;
  out.reserve(64 + trace.records.size() * 40);
  out += kTraceHeader;
  out += '\n';
  static const char* digits = "0123456789abcdef";
  for (const auto& chunk : trace.init) {
    out += "#init ";
    out += hex(chunk.paddr);
    out += ' ';
    for (std::uint8_t b : chunk.bytes) {
      out += digits[b >> 4];
      out += digits[b & 15];
    }
    out += '\n';
  }
  for (const auto& r : trace.records) write_record(r, out);
  for (const auto& c : trace.comments) {
    out += '#';
    out += c;
    out += '\n';
  }
  return out;
}

void write_trace(const Trace& trace, std::ostream& out) {
  const std::string text = format_trace(trace);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_trace(const Trace& trace, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw TraceError(TraceErrorKind::IoFailure, 0, "cannot write trace file: " + path);
  write_trace(trace, f);
  if (!f) throw TraceError(TraceErrorKind::IoFailure, 0, "write failed: " + path);
}

std::optional<std::uint64_t> trace_expectation(const Trace& trace, std::string_view key) {
  for (const auto& c : trace.comments) {
    auto tok = split_ws(c);
    if (tok.empty() || tok[0] != "expect") continue;
    for (std::size_t i = 1; i < tok.size(); ++i) {
      auto eq = tok[i].find('=');
      if (eq == std::string_view::npos || tok[i].substr(0, eq) != key) continue;
      std::uint64_t v;
      if (parse_u64(tok[i].substr(eq + 1), 10, v)) return v;
    }
  }
  return std::nullopt;
}

} // namespace constable
