#include "mmtk/pmem/allocator.hpp"

#include <algorithm>

namespace mmtk::pmem {

PmemAllocator::PmemAllocator(PmemPool& pool) : pool_(pool) { rebuild(); }

std::uint64_t PmemAllocator::slot_of(Offset block) const {
  const Layout& l = pool_.layout();
  if (block < l.heap_offset || (block - l.heap_offset) % kLineSize != 0) {
    throw UsageError("not a block offset");
  }
  std::uint64_t slot = (block - l.heap_offset) / kLineSize;
  if (slot >= l.heap_slots) throw UsageError("block offset beyond heap");
  return slot;
}

bool PmemAllocator::bit(Offset bitmap, std::uint64_t slot) const {
  return ((pool_.load_word(bitmap + slot / 64 * 8) >> (slot % 64)) & 1) != 0;
}

void PmemAllocator::set_bit(Offset bitmap, std::uint64_t slot, bool value) {
  Offset w = bitmap + slot / 64 * 8;
  std::uint64_t mask = 1ull << (slot % 64);
  std::uint64_t cur = pool_.load_word(w);
  for (;;) {
    std::uint64_t next = value ? (cur | mask) : (cur & ~mask);
    if (next == cur || pool_.cas_word(w, cur, next)) break;
  }
}

void PmemAllocator::rebuild() {
  const Layout& l = pool_.layout();
  std::lock_guard<std::mutex> g(mu_);
  free_.clear();
  for (std::uint64_t s = l.heap_slots; s-- > 0;) {
    if (!bit(l.bitmap_offset, s)) free_.push_back(static_cast<std::uint32_t>(s));
  }
}

Offset PmemAllocator::allocate(std::size_t bytes) {
  const Layout& l = pool_.layout();
  std::size_t n = (bytes + kLineSize - 1) / kLineSize;
  if (n == 0) n = 1;
  std::uint64_t slot = 0;
  if (n == 1) {
    {
      std::lock_guard<std::mutex> g(mu_);
      if (free_.empty()) throw OutOfPoolMemory("pool heap exhausted");
      slot = free_.back();
      free_.pop_back();
    }
    // Publish: the reservation above is volatile until this bit persists.
    set_bit(l.bitmap_offset, slot, true);
    pool_.flush(l.bitmap_offset + slot / 64 * 8);
  } else {
    std::lock_guard<std::mutex> g(mu_);
    std::uint64_t run = 0;
    bool found = false;
    for (std::uint64_t s = 0; s < l.heap_slots; ++s) {
      run = bit(l.bitmap_offset, s) ? 0 : run + 1;
      if (run == n) {
        slot = s + 1 - n;
        found = true;
        break;
      }
    }
    if (!found) throw OutOfPoolMemory("no contiguous run for multi-slot block");
    for (std::uint64_t s = slot + 1; s < slot + n; ++s) {
      set_bit(l.cont_bitmap_offset, s, true);
      pool_.flush(l.cont_bitmap_offset + s / 64 * 8);
    }
    for (std::uint64_t s = slot; s < slot + n; ++s) {
      set_bit(l.bitmap_offset, s, true);
      pool_.flush(l.bitmap_offset + s / 64 * 8);
    }
    free_.erase(std::remove_if(free_.begin(), free_.end(),
                               [&](std::uint32_t s) { return s >= slot && s < slot + n; }),
                free_.end());
  }
  Offset off = slot_offset(slot);
  if (observer_) observer_(Event::kAlloc, off);
  return off;
}

void PmemAllocator::free(Offset block) {
  const Layout& l = pool_.layout();
  std::uint64_t slot = slot_of(block);
  if (bit(l.cont_bitmap_offset, slot)) throw UsageError("free of a non-block-start offset");
  std::size_t n = block_slots(block);
  if (n == 0) throw DoubleFreeError("double free of block at offset " + std::to_string(block));
  Offset w = l.bitmap_offset + slot / 64 * 8;
  std::uint64_t mask = 1ull << (slot % 64);
  std::uint64_t cur = pool_.load_word(w);
  for (;;) {
    if ((cur & mask) == 0) throw DoubleFreeError("double free of block at offset " + std::to_string(block));
    if (pool_.cas_word(w, cur, cur & ~mask)) break;
  }
  pool_.flush(w);
  for (std::uint64_t s = slot + 1; s < slot + n; ++s) {
    set_bit(l.cont_bitmap_offset, s, false);
    pool_.flush(l.cont_bitmap_offset + s / 64 * 8);
    set_bit(l.bitmap_offset, s, false);
    pool_.flush(l.bitmap_offset + s / 64 * 8);
  }
  // Reported before the slot can be handed out again.
  if (observer_) observer_(Event::kFree, block);
  {
    std::lock_guard<std::mutex> g(mu_);
    for (std::uint64_t s = slot + n; s-- > slot;) free_.push_back(static_cast<std::uint32_t>(s));
  }
}

bool PmemAllocator::is_allocated(Offset block) const {
  const Layout& l = pool_.layout();
  if (block < l.heap_offset || (block - l.heap_offset) % kLineSize != 0) return false;
  std::uint64_t slot = (block - l.heap_offset) / kLineSize;
  if (slot >= l.heap_slots) return false;
  return bit(l.bitmap_offset, slot) && !bit(l.cont_bitmap_offset, slot);
}

std::size_t PmemAllocator::block_slots(Offset block) const {
  const Layout& l = pool_.layout();
  std::uint64_t slot = slot_of(block);
  if (!bit(l.bitmap_offset, slot) || bit(l.cont_bitmap_offset, slot)) return 0;
  std::size_t n = 1;
  while (slot + n < l.heap_slots && bit(l.cont_bitmap_offset, slot + n) && bit(l.bitmap_offset, slot + n)) ++n;
  return n;
}

std::size_t PmemAllocator::free_slots() const {
  std::lock_guard<std::mutex> g(mu_);
  return free_.size();
}

std::vector<Offset> PmemAllocator::free_list() const {
  std::lock_guard<std::mutex> g(mu_);
  std::vector<Offset> out;
  out.reserve(free_.size());
  for (std::uint32_t s : free_) out.push_back(slot_offset(s));
  return out;
}

std::vector<Offset> PmemAllocator::live_blocks() const {
  const Layout& l = pool_.layout();
  std::vector<Offset> out;
  for (std::uint64_t s = 0; s < l.heap_slots; ++s) {
    if (bit(l.bitmap_offset, s) && !bit(l.cont_bitmap_offset, s)) out.push_back(slot_offset(s));
  }
  return out;
}

}  // namespace mmtk::pmem
