#pragma once

#include <functional>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "mmtk/pmem/pool.hpp"

namespace mmtk::pmem {

class DoubleFreeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class OutOfPoolMemory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Slab of 64-byte slots tracked by two persistent bitmaps: `alloc` marks
// live slots, `cont` marks the non-first slots of a multi-slot block.
// The free list is volatile and rebuilt from the bitmaps on every boot, so
// a crash can leak a block but never hand out a live one.
class PmemAllocator {
 public:
  enum class Event { kAlloc, kFree };
  using Observer = std::function<void(Event, Offset)>;

  explicit PmemAllocator(PmemPool& pool);

  // Single-slot blocks are the runtime case; larger sizes are meant for
  // single-threaded setup.
  Offset allocate(std::size_t bytes = kLineSize);
  void free(Offset block);

  bool is_allocated(Offset block) const;
  std::size_t block_slots(Offset block) const;
  std::size_t free_slots() const;
  std::vector<Offset> free_list() const;
  std::vector<Offset> live_blocks() const;
  std::uint64_t slot_count() const { return pool_.layout().heap_slots; }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

 private:
  Offset slot_offset(std::uint64_t slot) const { return pool_.layout().heap_offset + slot * kLineSize; }
  std::uint64_t slot_of(Offset block) const;
  bool bit(Offset bitmap, std::uint64_t slot) const;
  void set_bit(Offset bitmap, std::uint64_t slot, bool value);
  void rebuild();

  PmemPool& pool_;
  mutable std::mutex mu_;
  std::vector<std::uint32_t> free_;  // stack, lowest slot on top
  Observer observer_;
};

}  // namespace mmtk::pmem
