#include "mmtk/smr.hpp"

#include <algorithm>

namespace mmtk {

Smr::Smr(pmem::PmemPool& pool, pmem::PmemAllocator& alloc, std::uint32_t max_threads)
    : pool_(pool),
      alloc_(alloc),
      p_(max_threads),
      slots_(std::make_unique<std::atomic<std::uint64_t>[]>(max_threads)),
      sections_(max_threads) {
  for (std::uint32_t i = 0; i < p_; ++i) {
    slots_[i].store(0);
    sections_[i].tid = i;
  }
}

CriticalSection& Smr::pin(ThreadCtx& ctx) {
  CriticalSection& cs = sections_.at(ctx.tid());
  cs.deferred.clear();
  cs.retired.clear();
  std::uint64_t e = global_.load();
  for (;;) {
    slots_[ctx.tid()].store(e);
    std::uint64_t again = global_.load();
    if (again == e) break;
    e = again;
  }
  cs.epoch = e;
  cs.open = true;
  ctx.cs = &cs;
  return cs;
}

CriticalSection& Smr::revive(ThreadCtx& ctx) {
  CriticalSection& cs = sections_.at(ctx.tid());
  if (!cs.open) return pin(ctx);
  ctx.cs = &cs;
  return cs;
}

bool Smr::section_open(std::uint32_t tid) const { return sections_.at(tid).open; }

void Smr::retire(ThreadCtx& ctx, Offset block) {
  if (ctx.cs == nullptr || !ctx.cs->open) throw RetireError("retire outside a critical section");
  if (!alloc_.is_allocated(block)) throw RetireError("retire of an unallocated block");
  ctx.cs->retired.push_back(block);
  if (ctx.tracer() != nullptr) ctx.tracer()->on_retire(ctx, block);
}

void Smr::defer_flush(ThreadCtx& ctx, Offset off) {
  if (ctx.cs == nullptr || !ctx.cs->open) throw RetireError("defer_flush outside a critical section");
  ctx.cs->deferred.push_back(off);
}

void Smr::unpin(ThreadCtx& ctx, const std::function<void()>& before_release) {
  CriticalSection& cs = *ctx.cs;
  ctx.point(Label::kUnpinBegin);
  std::vector<Offset> lines;
  lines.reserve(cs.deferred.size());
  for (Offset off : cs.deferred) lines.push_back(off / pmem::kLineSize);
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  for (Offset line : lines) pool_.flush(line * pmem::kLineSize);
  ctx.point(Label::kUnpinAfterFlush);
  if (before_release) before_release();
  std::sort(cs.retired.begin(), cs.retired.end());
  cs.retired.erase(std::unique(cs.retired.begin(), cs.retired.end()), cs.retired.end());
  {
    std::lock_guard<std::mutex> g(limbo_mu_);
    std::uint64_t e = global_.load();
    for (Offset b : cs.retired) limbo_.emplace_back(b, e);
  }
  cs.retired.clear();
  cs.deferred.clear();
  cs.open = false;
  slots_[ctx.tid()].store(0);
  ctx.cs = nullptr;
  ctx.point(Label::kUnpinEnd);
  if (unpins_.fetch_add(1) % 16 == 15) collect();
}

bool Smr::try_advance() {
  std::uint64_t e = global_.load();
  for (std::uint32_t i = 0; i < p_; ++i) {
    std::uint64_t s = slots_[i].load();
    if (s != 0 && s != e) return false;
  }
  return global_.compare_exchange_strong(e, e + 1);
}

std::size_t Smr::limbo_size() const {
  std::lock_guard<std::mutex> g(limbo_mu_);
  return limbo_.size();
}

void Smr::collect() {
  try_advance();
  std::vector<Offset> ready;
  {
    std::lock_guard<std::mutex> g(limbo_mu_);
    std::uint64_t e = global_.load();
    auto keep = std::stable_partition(limbo_.begin(), limbo_.end(),
                                      [e](const auto& entry) { return entry.second + 2 > e; });
    for (auto it = keep; it != limbo_.end(); ++it) ready.push_back(it->first);
    limbo_.erase(keep, limbo_.end());
  }
  // Entries leave limbo before they are freed: a crash in between leaks
  // rather than double-frees.
  for (Offset b : ready) alloc_.free(b);
}

void Smr::drain() {
  for (std::uint32_t i = 0; i < p_; ++i) {
    if (slots_[i].load() != 0) throw RetireError("drain with a pinned thread");
  }
  try_advance();
  try_advance();
  try_advance();
  collect();
}

RootRecord::RootRecord(pmem::PmemPool& pool, std::uint32_t tid, MementoTable table)
    : pool_(pool), line_(pool.layout().clearing_offset + static_cast<Offset>(tid) * pmem::kLineSize), table_(table) {
  if (tid >= pool.layout().max_threads) throw pmem::UsageError("thread id exceeds pool thread count");
}

void RootRecord::set_body(Offset body) {
  pool_.store_word(line_ + 24, body);
  pool_.flush(line_);
}

std::vector<std::uint64_t> RootRecord::cas_memento_words() const {
  std::vector<std::uint64_t> out{last_cas()};
  Offset b = body();
  if (b == 0) return out;
  for (const auto& f : table_) {
    if (f.kind == MementoField::Kind::kCas) out.push_back(pool_.load_word(b + f.rel));
  }
  return out;
}

Timestamp RootRecord::max_timestamp() const {
  Timestamp m = std::max(high_water(), casmmt::ts(last_cas()));
  Offset b = body();
  if (b == 0) return m;
  for (const auto& f : table_) {
    for (Offset w : f.ts_words(b)) {
      std::uint64_t v = pool_.load_word(w);
      m = std::max(m, f.kind == MementoField::Kind::kCas ? casmmt::ts(v) : v);
    }
  }
  return m;
}

void RootRecord::zero_subs() {
  Offset b = body();
  if (b == 0) return;
  std::vector<Offset> lines;
  for (const auto& f : table_) {
    for (Offset w : f.ts_words(b)) {
      if (pool_.load_word(w) == 0) continue;
      pool_.store_word(w, 0);
      lines.push_back(w / pmem::kLineSize);
    }
  }
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  for (Offset l : lines) pool_.flush_opt(l * pmem::kLineSize);
  pool_.sfence();
}

void RootRecord::clear(ThreadCtx* ctx, std::uint64_t next_index) {
  std::uint64_t last = last_cas();
  for (std::uint64_t w : cas_memento_words()) {
    if (!casmmt::fail(w) && casmmt::ts(w) > casmmt::ts(last)) last = w;
  }
  Timestamp hw = max_timestamp();
  // Flag, folded CAS memento and high-water mark share one line, so they
  // persist together.
  pool_.store_word(line_ + 16, last);
  pool_.store_word(line_ + 32, hw);
  pool_.store_word(line_ + 8, kClearingFlag | next_index);
  pool_.flush(line_);
  if (ctx != nullptr) ctx->point(Label::kClearAfterFlag);
  zero_subs();
  if (ctx != nullptr) ctx->point(Label::kClearAfterSubs);
  pool_.store_word(line_, next_index);
  pool_.store_word(line_ + 8, 0);
  pool_.flush(line_);
  if (ctx != nullptr) ctx->point(Label::kClearDone);
}

void RootRecord::resume_clear() {
  std::uint64_t w = pool_.load_word(line_ + 8);
  if ((w & kClearingFlag) == 0) return;
  zero_subs();
  pool_.store_word(line_, w & ~kClearingFlag);
  pool_.store_word(line_ + 8, 0);
  pool_.flush(line_);
}

}  // namespace mmtk
