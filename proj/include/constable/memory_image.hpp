#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>

#include "constable/trace.hpp"

namespace constable {

/// Sparse byte-addressed memory over the 48-bit physical space. Untouched
/// bytes read as zero. Multi-byte values are little-endian.
class MemoryImage {
public:
  std::uint8_t read_byte(std::uint64_t paddr) const;
  void write_byte(std::uint64_t paddr, std::uint8_t v);

  /// `size` bytes starting at `paddr`; the range must not cross a line.
  std::uint64_t read(std::uint64_t paddr, unsigned size) const;
  void write(std::uint64_t paddr, unsigned size, std::uint64_t value);

  void apply(const InitChunk& chunk);

  std::size_t touched_lines() const { return lines_.size(); }

private:
  using Line = std::array<std::uint8_t, kLineBytes>;
  std::unordered_map<std::uint64_t, Line> lines_;
};

} // namespace constable
