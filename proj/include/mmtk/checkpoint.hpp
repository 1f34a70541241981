#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>

#include "mmtk/context.hpp"

namespace mmtk {

template <std::size_t N>
struct Checkpointed {
  std::array<std::uint64_t, N> value{};
  bool detected = false;
};

// Two-slot memento [ts0][buf0][ts1][buf1] holding N words per buffer.
template <std::size_t N>
class Checkpoint {
  static_assert(N >= 1 && N <= 3, "buffers are 8, 16 or 24 bytes");

 public:
  using Value = std::array<std::uint64_t, N>;
  static constexpr std::size_t kSlotBytes = 8 * (N + 1);
  static constexpr std::size_t kBytes = 2 * kSlotBytes;

  explicit Checkpoint(Offset base) : base_(base) {}
  Offset base() const { return base_; }
  Offset ts_offset(int slot) const { return base_ + slot * kSlotBytes; }

  Checkpointed<N> run(ThreadCtx& ctx, const Value& v) {
    return run_with(ctx, [&] { return v; });
  }

  // The thunk is evaluated only when the step was not already performed,
  // so side-effecting expressions (allocation) run at most once per commit.
  template <class F>
  Checkpointed<N> run_with(ThreadCtx& ctx, F&& thunk) {
    pmem::PmemPool& pool = ctx.pool();
    Timestamp t0 = pool.load_word(ts_offset(0));
    Timestamp t1 = pool.load_word(ts_offset(1));
    int latest = t1 > t0 ? 1 : 0;
    Timestamp t_latest = latest == 1 ? t1 : t0;
    Timestamp t_local = casmmt::ts(ctx.arrays().local(ctx.tid()));
    if (t_latest > t_local) {
      Checkpointed<N> out;
      out.detected = true;
      for (std::size_t i = 0; i < N; ++i) out.value[i] = pool.load_word(ts_offset(latest) + 8 * (i + 1));
      ctx.arrays().set_local(ctx.tid(), casmmt::encode(Parity::kEven, false, t_latest));
      ctx.point(Label::kCkptDetected);
      return out;
    }
    ctx.recovery = false;
    Value v = thunk();
    int stale = 1 - latest;
    Offset slot = ts_offset(stale);
    for (std::size_t i = 0; i < N; ++i) pool.store_word(slot + 8 * (i + 1), v[i]);
    if (spans_lines()) {
      for (Offset line = (slot + 8) / pmem::kLineSize; line <= (slot + 8 * N) / pmem::kLineSize; ++line) {
        pool.flush(line * pmem::kLineSize);
      }
    }
    ctx.point(Label::kCkptAfterBuf);
    Timestamp ts = ctx.clock().now();
    pool.store_word(slot, ts);
    pool.flush(slot);
    ctx.arrays().set_local(ctx.tid(), casmmt::encode(Parity::kEven, false, ts));
    if (ctx.tracer() != nullptr) ctx.tracer()->on_checkpoint(ctx, base_, ts);
    ctx.point(Label::kCkptAfterTs);
    return {v, false};
  }

  std::optional<std::pair<Timestamp, Value>> peek(const pmem::PmemPool& pool) const {
    Timestamp t0 = pool.load_word(ts_offset(0));
    Timestamp t1 = pool.load_word(ts_offset(1));
    if (t0 == 0 && t1 == 0) return std::nullopt;
    int latest = t1 > t0 ? 1 : 0;
    Value v{};
    for (std::size_t i = 0; i < N; ++i) v[i] = pool.load_word(ts_offset(latest) + 8 * (i + 1));
    return std::make_pair(latest == 1 ? t1 : t0, v);
  }

  void clear(pmem::PmemPool& pool) const {
    pool.store_word(ts_offset(0), 0);
    pool.store_word(ts_offset(1), 0);
    pool.flush(ts_offset(0));
    if (ts_offset(0) / pmem::kLineSize != ts_offset(1) / pmem::kLineSize) pool.flush(ts_offset(1));
  }

  bool spans_lines() const { return base_ / pmem::kLineSize != (base_ + kBytes - 1) / pmem::kLineSize; }

 private:
  Offset base_;
};

}  // namespace mmtk
