#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "mmtk/context.hpp"
#include "mmtk/memento.hpp"

namespace mmtk {

class RetireError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct CriticalSection {
  std::uint32_t tid = 0;
  std::uint64_t epoch = 0;
  bool open = false;
  std::vector<Offset> deferred;  // locations to flush before retirees leave
  std::vector<Offset> retired;   // may hold duplicates until unpin
};

// Epoch-based reclamation with deferred flushes and revivable sections.
// A block handed to the reclaimer in epoch e is freed once the global epoch
// reaches e + 2.
class Smr {
 public:
  Smr(pmem::PmemPool& pool, pmem::PmemAllocator& alloc, std::uint32_t max_threads);

  CriticalSection& pin(ThreadCtx& ctx);
  // Returns the section a crashed thread left open, or a fresh pin.
  CriticalSection& revive(ThreadCtx& ctx);
  void retire(ThreadCtx& ctx, Offset block);
  void defer_flush(ThreadCtx& ctx, Offset off);
  // Flush deferred lines, run `before_release` (the root-memento clear),
  // then pass the deduplicated retirees to the reclaimer.
  void unpin(ThreadCtx& ctx, const std::function<void()>& before_release = {});

  bool section_open(std::uint32_t tid) const;
  std::uint64_t epoch() const { return global_.load(); }
  std::size_t limbo_size() const;
  // Advance and free what is eligible. Called periodically from unpin.
  void collect();
  // Test hook: with no thread pinned, free everything in limbo.
  void drain();

 private:
  bool try_advance();

  pmem::PmemPool& pool_;
  pmem::PmemAllocator& alloc_;
  std::uint32_t p_;
  std::atomic<std::uint64_t> global_{1};
  std::unique_ptr<std::atomic<std::uint64_t>[]> slots_;
  std::vector<CriticalSection> sections_;
  mutable std::mutex limbo_mu_;
  std::vector<std::pair<Offset, std::uint64_t>> limbo_;
  std::atomic<std::uint64_t> unpins_{0};
};

// Per-thread root record, one cacheline in the pool's clearing region:
//   w0 index of the next root operation
//   w1 clearing word: bit 63 flag, low bits the index being advanced to
//   w2 last successful CAS memento of the thread (survives clears)
//   w3 offset of the composite memento body
//   w4 highest timestamp ever cleared from this record
class RootRecord {
 public:
  static constexpr std::uint64_t kClearingFlag = 1ull << 63;

  RootRecord(pmem::PmemPool& pool, std::uint32_t tid, MementoTable table);

  Offset line() const { return line_; }
  std::uint64_t op_index() const { return pool_.load_word(line_); }
  bool clearing() const { return (pool_.load_word(line_ + 8) & kClearingFlag) != 0; }
  std::uint64_t last_cas() const { return pool_.load_word(line_ + 16); }
  Offset body() const { return pool_.load_word(line_ + 24); }
  Timestamp high_water() const { return pool_.load_word(line_ + 32); }
  void set_body(Offset body);

  // Invalidate every sub-memento and advance the operation index, resumably.
  void clear(ThreadCtx* ctx, std::uint64_t next_index);
  // Finish a clear interrupted by a crash. No-op when the flag is down.
  void resume_clear();

  // Every timestamp-carrying word of the record and its body.
  std::vector<std::uint64_t> cas_memento_words() const;
  Timestamp max_timestamp() const;

 private:
  void zero_subs();

  pmem::PmemPool& pool_;
  Offset line_;
  MementoTable table_;
};

}  // namespace mmtk
