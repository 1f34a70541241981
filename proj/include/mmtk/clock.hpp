#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>

#include "mmtk/pmem/pool.hpp"
#include "mmtk/words.hpp"

namespace mmtk {

using Timestamp = std::uint64_t;

class TimestampOverflow : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

// One global counter per boot; every read ticks it. After calibrate(t_max)
// the first value handed out exceeds t_max.
class Clock {
 public:
  explicit Clock(std::uint64_t raw_start = 0) : raw_(raw_start), init_(raw_start) {}

  Timestamp now() {
    std::uint64_t r = raw_.fetch_add(1, std::memory_order_seq_cst) + 1;
    Timestamp t = base_ + (r - init_);
    if (t > kTsMask) throw TimestampOverflow("timestamp exceeds 62 bits");
    return t;
  }
  // Latest issued value, without ticking.
  Timestamp peek() const { return base_ + (raw_.load() - init_); }
  std::uint64_t raw() const { return raw_.load(); }

  // Single-threaded, before mutators start.
  void calibrate(Timestamp t_max) {
    init_ = raw_.load();
    base_ = t_max;
  }

 private:
  std::atomic<std::uint64_t> raw_;
  std::uint64_t init_;
  Timestamp base_ = 0;
};

// LOCAL and OWN live in DRAM and are rebuilt each boot; HELP[2][P] lives in
// the pool at the header-declared offset. LOCAL and OWN hold CasMemento words.
class GlobalArrays {
 public:
  explicit GlobalArrays(pmem::PmemPool& pool);

  std::uint32_t max_threads() const { return p_; }

  std::uint64_t local(std::uint32_t tid) const { return local_[check(tid)].load(std::memory_order_relaxed); }
  void set_local(std::uint32_t tid, std::uint64_t w) { local_[check(tid)].store(w, std::memory_order_relaxed); }
  std::uint64_t own(std::uint32_t tid) const { return own_[check(tid)].load(std::memory_order_relaxed); }
  void set_own(std::uint32_t tid, std::uint64_t w) { own_[check(tid)].store(w, std::memory_order_relaxed); }

  Offset help_offset(Parity p, std::uint32_t tid) const;
  Timestamp help(Parity p, std::uint32_t tid) const;
  // Raises HELP[p][tid] from `expected` to `desired`; false leaves it unchanged.
  bool cas_help(Parity p, std::uint32_t tid, Timestamp& expected, Timestamp desired);

  // OWN[tid] := the successful memento word with the largest timestamp, or
  // (Even, 0) when there is none.
  void init_own(std::uint32_t tid, std::span<const std::uint64_t> memento_words);

  // Largest timestamp held in either HELP array.
  Timestamp max_help() const;

 private:
  std::uint32_t check(std::uint32_t tid) const {
    if (tid >= p_) throw pmem::UsageError("thread id exceeds pool thread count");
    return tid;
  }

  pmem::PmemPool& pool_;
  std::uint32_t p_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> local_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> own_;
};

}  // namespace mmtk
