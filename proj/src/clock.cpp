#include "mmtk/clock.hpp"

#include <algorithm>

namespace mmtk {

GlobalArrays::GlobalArrays(pmem::PmemPool& pool)
    : pool_(pool),
      p_(pool.layout().max_threads),
      local_(std::make_unique<std::atomic<std::uint64_t>[]>(p_)),
      own_(std::make_unique<std::atomic<std::uint64_t>[]>(p_)) {
  for (std::uint32_t i = 0; i < p_; ++i) {
    local_[i].store(0);
    own_[i].store(0);
  }
}

Offset GlobalArrays::help_offset(Parity p, std::uint32_t tid) const {
  return pool_.layout().help_offset + (static_cast<std::uint64_t>(p) * p_ + check(tid)) * 8;
}

Timestamp GlobalArrays::help(Parity p, std::uint32_t tid) const { return pool_.load_word(help_offset(p, tid)); }

bool GlobalArrays::cas_help(Parity p, std::uint32_t tid, Timestamp& expected, Timestamp desired) {
  return pool_.cas_word(help_offset(p, tid), expected, desired);
}

void GlobalArrays::init_own(std::uint32_t tid, std::span<const std::uint64_t> memento_words) {
  std::uint64_t best = casmmt::encode(Parity::kEven, false, 0);
  for (std::uint64_t w : memento_words) {
    if (casmmt::fail(w)) continue;
    if (casmmt::ts(w) > casmmt::ts(best)) best = w;
  }
  set_own(tid, best);
}

Timestamp GlobalArrays::max_help() const {
  Timestamp m = 0;
  for (std::uint32_t t = 0; t < p_; ++t) {
    m = std::max({m, help(Parity::kEven, t), help(Parity::kOdd, t)});
  }
  return m;
}

}  // namespace mmtk
