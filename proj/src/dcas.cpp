#include "mmtk/dcas.hpp"

namespace mmtk::dcas {

namespace {

void check_stable(std::uint64_t v) {
  if (casword::parity(v) != Parity::kEven || !casword::is_stable(v)) {
    throw pmem::UsageError("detectable CAS inputs must be stable words");
  }
}

}  // namespace

std::uint64_t load(ThreadCtx& ctx, Offset loc) { return load_help(ctx, loc, ctx.pool().load_word(loc)); }

std::uint64_t load_help(ThreadCtx& ctx, Offset loc, std::uint64_t old) {
  pmem::PmemPool& pool = ctx.pool();
  GlobalArrays& arrays = ctx.arrays();
  const std::uint64_t patience = ctx.env().config.patience;
  for (;;) {
    if (casword::is_stable(old)) return casword::stable(old);
    Timestamp t_cur = ctx.clock().now();
    std::uint64_t cur = pool.load_word(loc);
    for (;;) {
      if (casword::is_stable(cur)) return casword::stable(cur);
      if (old != cur) {
        old = cur;
        t_cur = ctx.clock().now();
        cur = pool.load_word(loc);
        continue;
      }
      if (ctx.clock().now() < t_cur + patience) {
        // Back off: give the owner a chance to strip its own annotation.
        cur = pool.load_word(loc);
        continue;
      }
      break;
    }
    Parity p_old = casword::parity(old);
    std::uint32_t owner = static_cast<std::uint32_t>(casword::raw_tid(old) - 1);
    Timestamp t_help = arrays.help(p_old, owner);
    if (t_cur <= t_help) {
      old = pool.load_word(loc);
      continue;
    }
    pool.flush_opt(loc);
    if (!arrays.cas_help(p_old, owner, t_help, t_cur)) {
      old = pool.load_word(loc);
      continue;
    }
    if (ctx.tracer() != nullptr) ctx.tracer()->on_help(ctx, loc, old, t_cur);
    ++ctx.helps;
    ctx.point(Label::kCasHelpRaised);
    pool.flush_opt(arrays.help_offset(p_old, owner));
    std::uint64_t stripped = casword::stable(old);
    std::uint64_t expected = old;
    if (!pool.cas_word(loc, expected, stripped)) {
      old = expected;
      continue;
    }
    ctx.point(Label::kCasHelpApplied);
    return stripped;
  }
}

CasResult cas(ThreadCtx& ctx, Offset loc, std::uint64_t old, std::uint64_t desired, Offset mmt) {
  check_stable(old);
  check_stable(desired);
  pmem::PmemPool& pool = ctx.pool();
  GlobalArrays& arrays = ctx.arrays();
  const std::uint32_t tid = ctx.tid();
  const std::uint64_t rt = encode_tid(tid);

  const std::uint64_t own = arrays.own(tid);
  const Parity p_own = casmmt::parity(own);
  const Timestamp t_own = casmmt::ts(own);
  const std::uint64_t new_annotated = casword::encode(!p_own, rt, desired);

  enum class Resume { kFirstCas, kFlushLoc, kMemento, kOwn, kLocal };
  Resume at = Resume::kFirstCas;
  std::uint64_t ts_succ = 0;

  if (ctx.recovery) {
    const std::uint64_t pt = pool.load_word(mmt);
    const Timestamp t_mmt = casmmt::ts(pt);
    std::uint64_t cur = pool.load_word(loc);
    const Timestamp t_local = casmmt::ts(arrays.local(tid));
    bool examine_location = false;
    if (t_mmt < t_local) {
      ctx.point(Label::kCasRecStale);
      examine_location = true;
    } else if (casmmt::fail(pt)) {
      arrays.set_local(tid, pt);
      ctx.point(Label::kCasRecFail);
      return {false, load_help(ctx, loc, cur)};
    } else if (t_mmt != 0 && t_mmt < t_own) {
      ts_succ = pt;
      ctx.point(Label::kCasRecNotLast);
      at = Resume::kLocal;
    } else if (t_mmt != 0) {
      ts_succ = pt;
      ctx.point(Label::kCasRecResume36);
      at = Resume::kOwn;
    } else {
      examine_location = true;
    }
    if (examine_location) {
      if (casword::raw_tid(cur) == rt && casword::stable(cur) == desired) {
        ctx.point(Label::kCasRecResume33);
        at = Resume::kFlushLoc;
      } else if (t_own < arrays.help(!p_own, tid)) {
        ctx.point(Label::kCasRecResume34);
        at = Resume::kMemento;
      } else {
        ctx.point(Label::kCasRecNormal);
      }
      // Nothing after this step can have run before the crash.
      ctx.recovery = false;
    }
  }

  if (at == Resume::kFirstCas) {
    for (;;) {
      std::uint64_t expected = old;
      if (pool.cas_word(loc, expected, new_annotated)) break;
      std::uint64_t cur = load_help(ctx, loc, expected);
      if (cur == old) continue;
      // The failure memento carries a fresh timestamp rather than 0 so that
      // LOCAL keeps increasing and later checkpoints are not mistaken for
      // pre-crash work.
      const std::uint64_t ts_fail = casmmt::encode(Parity::kEven, true, ctx.clock().now());
      pool.store_word(mmt, ts_fail);
      pool.flush(mmt);
      arrays.set_local(tid, ts_fail);
      ctx.point(Label::kCasAfterFail);
      return {false, cur};
    }
    if (ctx.tracer() != nullptr) ctx.tracer()->on_cas_installed(ctx, loc, new_annotated);
    ctx.point(Label::kCasAfterFirstCas);
    at = Resume::kFlushLoc;
  }
  if (at == Resume::kFlushLoc) {
    pool.flush(loc);
    ctx.point(Label::kCasAfterFlushLoc);
    at = Resume::kMemento;
  }
  if (at == Resume::kMemento) {
    ts_succ = casmmt::encode(!p_own, false, ctx.clock().now());
    if (ctx.tracer() != nullptr) ctx.tracer()->on_cas_committed(ctx, ts_succ);
    pool.store_word(mmt, ts_succ);
    pool.flush_opt(mmt);
    ctx.point(Label::kCasAfterMementoStore);
    at = Resume::kOwn;
  }
  if (at == Resume::kOwn) {
    arrays.set_own(tid, ts_succ);
    // Strip using the parity that was checkpointed; on a resumed execution
    // OWN already holds this CAS, so toggling OWN would pick the wrong one.
    std::uint64_t expected = casword::encode(casmmt::parity(ts_succ), rt, desired);
    pool.cas_word(loc, expected, desired);
    // An unpersisted strip can resurface after a crash as this CAS's
    // annotation; helping it then would bump HELP past a later CAS.
    pool.flush_opt(loc);
    pool.sfence();
    ctx.point(Label::kCasAfterSecondCas);
  }
  arrays.set_local(tid, ts_succ);
  return {true, desired};
}

void memento_clear(pmem::PmemPool& pool, Offset mmt) {
  pool.store_word(mmt, casmmt::encode(Parity::kEven, false, 0));
  pool.flush_opt(mmt);
}

}  // namespace mmtk::dcas
