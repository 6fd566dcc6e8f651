#include "constable/memory_image.hpp"

namespace constable {

std::uint8_t MemoryImage::read_byte(std::uint64_t paddr) const {
  auto it = lines_.find(line_of(paddr));
  return it == lines_.end() ? 0 : it->second[paddr & (kLineBytes - 1)];
}

void MemoryImage::write_byte(std::uint64_t paddr, std::uint8_t v) {
  auto [it, inserted] = lines_.try_emplace(line_of(paddr));
  if (inserted) it->second.fill(0);
  it->second[paddr & (kLineBytes - 1)] = v;
}

std::uint64_t MemoryImage::read(std::uint64_t paddr, unsigned size) const {
  auto it = lines_.find(line_of(paddr));
  if (it == lines_.end()) return 0;
  const unsigned off = static_cast<unsigned>(paddr & (kLineBytes - 1));
  std::uint64_t v = 0;
  for (unsigned i = 0; i < size; ++i) v |= std::uint64_t{it->second[off + i]} << (8 * i);
  return v;
}

void MemoryImage::write(std::uint64_t paddr, unsigned size, std::uint64_t value) {
  auto [it, inserted] = lines_.try_emplace(line_of(paddr));
  if (inserted) it->second.fill(0);
  const unsigned off = static_cast<unsigned>(paddr & (kLineBytes - 1));
  for (unsigned i = 0; i < size; ++i) it->second[off + i] = static_cast<std::uint8_t>(value >> (8 * i));
}

void MemoryImage::apply(const InitChunk& chunk) {
  for (std::size_t i = 0; i < chunk.bytes.size(); ++i) write_byte(chunk.paddr + i, chunk.bytes[i]);
}

} // namespace constable
