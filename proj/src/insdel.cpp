#include "mmtk/insdel.hpp"

#include "mmtk/smr.hpp"

namespace mmtk::insdel {

std::uint64_t load(ThreadCtx& ctx, Offset loc) {
  pmem::PmemPool& pool = ctx.pool();
  const std::uint64_t patience = ctx.env().config.patience;
  std::uint64_t old = pool.load_word(loc);
  for (;;) {
    if (!indelword::persist(old)) return indelword::stable(old);
    Timestamp t = ctx.clock().now();
    std::uint64_t cur = pool.load_word(loc);
    while (indelword::persist(cur) && cur == old && ctx.clock().now() < t + patience) {
      cur = pool.load_word(loc);
    }
    if (!indelword::persist(cur)) return indelword::stable(cur);
    if (cur != old) {
      old = cur;
      continue;
    }
    pool.flush(loc);
    ctx.point(Label::kLoadFlushed);
    std::uint64_t cleared = indelword::stable(old);
    std::uint64_t expected = old;
    if (!pool.cas_word(loc, expected, cleared)) {
      old = expected;
      continue;
    }
    return cleared;
  }
}

Result insert(ThreadCtx& ctx, Offset loc, std::uint64_t block, const Traversable& ds) {
  pmem::PmemPool& pool = ctx.pool();
  const Offset off = indelword::offset(block);
  if (ctx.recovery) {
    if (ds.contains(off) || pool.load_word(off + kReplField) != 0) {
      ctx.point(Label::kInsRecContained);
      return {true, block, false};
    }
    ctx.point(Label::kInsRecSpurious);
    ctx.recovery = false;
    return {false, load(ctx, loc), true};
  }
  std::uint64_t expected = 0;
  const std::uint64_t marked = indelword::encode(true, block);
  if (!pool.cas_word(loc, expected, marked)) return {false, load(ctx, loc), false};
  ctx.point(Label::kInsAfterCas);
  pool.flush(loc);
  ctx.point(Label::kInsAfterFlush);
  expected = marked;
  pool.cas_word(loc, expected, indelword::stable(block));
  return {true, block, false};
}

Result remove(ThreadCtx& ctx, Offset loc, std::uint64_t old, std::uint64_t desired) {
  pmem::PmemPool& pool = ctx.pool();
  const std::uint64_t rt = encode_tid(ctx.tid());
  const Offset repl = repl_of(old);
  if (ctx.recovery) {
    std::uint64_t r = pool.load_word(repl);
    if (replword::raw_tid(r) != rt) {
      ctx.point(Label::kDelRecErr);
      ctx.recovery = false;
      return {false, load_help(ctx, loc, old), false};
    }
    ctx.point(Label::kDelRecResume);
  } else {
    std::uint64_t expected = 0;
    const std::uint64_t committed = replword::encode(rt, desired);
    if (!pool.cas_word(repl, expected, committed)) return {false, load_help(ctx, loc, old), false};
    if (ctx.tracer() != nullptr) ctx.tracer()->on_repl_commit(ctx, indelword::offset(old), committed);
    ctx.point(Label::kDelAfterReplCas);
  }
  pool.flush_opt(repl);
  std::uint64_t expected = old;
  pool.cas_word(loc, expected, desired);
  if (!ctx.env().config.skip_delete_flush) ctx.env().smr->defer_flush(ctx, loc);
  ctx.env().smr->retire(ctx, indelword::offset(old));
  ctx.point(Label::kDelAfterLocCas);
  return {true, old, false};
}

std::uint64_t load_help(ThreadCtx& ctx, Offset loc, std::uint64_t old) {
  pmem::PmemPool& pool = ctx.pool();
  if (indelword::offset(old) == pmem::kNull) return old;
  const Offset repl = repl_of(old);
  const std::uint64_t r = pool.load_word(repl);
  if (r == 0) return old;
  const std::uint64_t successor = replword::stable(r);
  Timestamp t = ctx.clock().now();
  std::uint64_t cur = pool.load_word(loc);
  while (cur == old && ctx.clock().now() < t + ctx.env().config.patience) cur = pool.load_word(loc);
  if (cur != old) return indelword::persist(cur) ? load(ctx, loc) : indelword::stable(cur);
  pool.flush_opt(repl);
  std::uint64_t expected = old;
  if (!pool.cas_word(loc, expected, successor)) {
    return indelword::persist(expected) ? load(ctx, loc) : indelword::stable(expected);
  }
  ++ctx.helps;
  ctx.point(Label::kDelHelpApplied);
  return successor;
}

}  // namespace mmtk::insdel
