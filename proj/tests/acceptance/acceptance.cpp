// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any failed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mmtk/checkpoint.hpp"
#include "mmtk/dcas.hpp"
#include "mmtk/ds/container.hpp"
#include "mmtk/harness/enumerate.hpp"
#include "mmtk/harness/help_tracker.hpp"
#include "mmtk/harness/runner.hpp"
#include "mmtk/harness/scheduler.hpp"
#include "mmtk/harness/verify.hpp"

using namespace mmtk;
using namespace mmtk::harness;
using ds::DsKind;

namespace {

using Clock_ = std::chrono::steady_clock;

int g_failed = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

double since(Clock_::time_point t) { return std::chrono::duration<double>(Clock_::now() - t).count(); }

std::string first(const std::vector<std::string>& v) { return v.empty() ? "" : v.front(); }

constexpr DsKind kQueues[] = {DsKind::kMsqCas, DsKind::kMsqIndel, DsKind::kMsqVol};
constexpr DsKind kAll[] = {DsKind::kMsqCas, DsKind::kMsqIndel, DsKind::kMsqVol, DsKind::kStack};

// ---------------------------------------------------------------------------
// 1. Full-system crashes, exactly-once.
void full_crash_exactly_once() {
  const auto t0 = Clock_::now();
  std::uint64_t runs = 0, bad = 0, min_crashes = ~0ull;
  std::string why;
  for (DsKind k : kQueues) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      RunConfig cfg;
      cfg.spec.ds = k;
      cfg.spec.threads = 4;
      cfg.spec.ops = 10000;
      cfg.spec.seed = seed;
      cfg.plan = CrashPlan::parse("kind=full_system; count=5; model=revert_all_dirty");
      RunResult r = run(cfg);
      ++runs;
      min_crashes = std::min<std::uint64_t>(min_crashes, r.full_crashes);
      if (!r.ok() || r.full_crashes < 5) {
        ++bad;
        if (why.empty()) {
          why = std::string(ds::ds_name(k)) + " seed " + std::to_string(seed) + ": " +
                (r.ok() ? "too few crashes" : r.errors.front());
        }
      }
    }
  }
  const double secs = since(t0);
  const bool ok = bad == 0 && secs < 300;
  report("C1", ok,
         "full-crash exactly-once: " + std::to_string(runs) + " runs (3 queues x 100 seeds, 4x10000 ops), " +
             "min crashes/run " + std::to_string(min_crashes) + ", failures " + std::to_string(bad) + ", " +
             std::to_string(static_cast<int>(secs)) + "s" + (why.empty() ? "" : "; " + why));
}

// ---------------------------------------------------------------------------
// 2. Thread crashes at labeled points, no double free.
void thread_crashes() {
  std::uint64_t runs = 0, crashes = 0, double_frees = 0, other = 0;
  std::string why;
  for (DsKind k : kAll) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      RunConfig cfg;
      cfg.spec.ds = k;
      cfg.spec.threads = 4;
      cfg.spec.ops = 300;
      cfg.spec.prefill = 8;
      cfg.spec.workload = Workload::kEnq50;
      cfg.spec.seed = seed;
      cfg.plan = CrashPlan::parse("kind=thread; trigger=random; count=12; every=150");
      RunResult r = run(cfg);
      ++runs;
      crashes += r.thread_crashes;
      const auto df = verify_no_double_free(r.log.records());
      double_frees += df.size();
      if (!r.ok()) {
        ++other;
        if (why.empty()) why = std::string(ds::ds_name(k)) + " seed " + std::to_string(seed) + ": " + r.errors.front();
      }
    }
  }
  report("C2", double_frees == 0 && other == 0 && crashes > 0,
         "thread crashes: " + std::to_string(runs) + " runs (4 structures x 100 seeds), " + std::to_string(crashes) +
             " thread crashes, double frees " + std::to_string(double_frees) + ", failed runs " +
             std::to_string(other) + (why.empty() ? "" : "; " + why));
}

// ---------------------------------------------------------------------------
// 3. Enumerated crash windows and recovery-state coverage.

// A few root operations per thread, run sequentially on one OS thread.
EnumScenario ds_scenario(DsKind kind, std::uint32_t threads, std::uint64_t ops, Workload w, bool reverse_recovery,
                         Config algo = {}) {
  auto spec = std::make_shared<WorkloadSpec>();
  spec->ds = kind;
  spec->threads = threads;
  spec->ops = ops;
  spec->prefill = 2;
  spec->workload = w;
  EnumScenario sc;
  sc.options.config = algo;
  sc.make_pool = [spec] {
    auto pool = pmem::PmemPool::create_anonymous(1 << 20, 8);
    Instance::format(*pool, spec->ds, spec->threads, spec->prefill);
    pool->persist_all();
    return pool;
  };
  sc.script = [spec](Instance& inst, HistoryLog& log) {
    // make_pool formats without a log.
    for (std::uint64_t k = 0; k < spec->prefill; ++k) log.event(RecOp::kPrefill, -1, prefill_value(k));
    std::vector<ThreadCtx> ctx;
    for (std::uint32_t t = 0; t < spec->threads; ++t) ctx.emplace_back(inst.env(), t);
    for (std::uint64_t i = 0; i < spec->ops; ++i) {
      for (std::uint32_t t = 0; t < spec->threads; ++t) inst.workload_op(ctx[t], *spec, i);
    }
  };
  sc.recover = [spec, reverse_recovery](Instance& inst, HistoryLog&) {
    for (std::uint32_t n = 0; n < spec->threads; ++n) {
      const std::uint32_t t = reverse_recovery ? spec->threads - 1 - n : n;
      ThreadCtx ctx(inst.env(), t, true);
      while (inst.record(t).op_index() < spec->ops) inst.workload_op(ctx, *spec, inst.record(t).op_index());
    }
  };
  sc.check = [](Instance& inst, const HistoryLog& log) -> std::string {
    const auto recs = log.records();
    auto errs = verify_exactly_once(recs, inst.container()->traverse());
    auto df = verify_no_double_free(recs);
    errs.insert(errs.end(), df.begin(), df.end());
    return first(errs);
  };
  return sc;
}

// A detectable CAS that fails, then a crash before the thread moves on.
EnumScenario failed_cas_scenario() {
  static constexpr MementoField kFields[] = {{"cas", MementoField::Kind::kCas, 0, 0, 0, "fail"}};
  const std::uint64_t have = casword::make(1, 0x1000), stale = casword::make(2, 0x2000),
                      want = casword::make(3, 0x3000);
  auto loc = std::make_shared<Offset>(0);
  EnumScenario sc;
  sc.options.raw_table = kFields;
  sc.uaf_sweep = false;
  sc.make_pool = [loc, have] {
    auto pool = pmem::PmemPool::create_anonymous(1 << 20, 8);
    Instance::format_raw(*pool, kFields, 1);
    {
      AppOptions o;
      o.raw_table = kFields;
      Instance inst(*pool, o);
      *loc = inst.alloc().allocate();
      for (Offset w = 0; w < pmem::kLineSize; w += 8) pool->store_word(*loc + w, 0);
      pool->store_word(*loc, have);
    }
    pool->persist_all();
    return pool;
  };
  sc.script = [loc, stale, want](Instance& inst, HistoryLog&) {
    ThreadCtx ctx(inst.env(), 0);
    dcas::cas(ctx, *loc, stale, want, inst.record(0).body());
    ctx.point(Label::kOpBegin);
  };
  sc.recover = [loc, stale, want](Instance& inst, HistoryLog&) {
    ThreadCtx ctx(inst.env(), 0, true);
    if (dcas::cas(ctx, *loc, stale, want, inst.record(0).body()).ok) inst.pool().store_word(*loc, 0);
  };
  sc.check = [loc, have](Instance& inst, const HistoryLog&) -> std::string {
    return inst.pool().load_word(*loc) == have ? "" : "failed CAS took effect after recovery";
  };
  return sc;
}

struct WindowTally {
  std::uint64_t windows = 0, points = 0, images = 0;
  std::vector<std::string> failures;
};

// Every occurrence of the window in the script.
void sweep_window(const EnumScenario& sc, Label from, Label to, WindowTally& t, std::uint64_t max_hits = 64) {
  for (std::uint64_t hit = 1; hit <= max_hits; ++hit) {
    EnumReport rep = enumerate_crash_window(sc, from, to, hit);
    if (!rep.window_found) break;
    ++t.windows;
    t.points += rep.crash_points;
    t.images += rep.images;
    for (auto& f : rep.failures) {
      t.failures.push_back(std::string(label_name(from)) + " #" + std::to_string(hit) + ": " + f);
    }
  }
}

void enumerated_windows() {
  coverage::reset();
  struct Case {
    const char* name;
    DsKind kind;
    Label from, to;
  };
  const Case cases[] = {
      {"(a) dcas first CAS -> memento", DsKind::kMsqCas, Label::kCasAfterFirstCas, Label::kCasAfterMementoStore},
      {"(a) dcas first CAS -> memento [stack]", DsKind::kStack, Label::kCasAfterFirstCas,
       Label::kCasAfterMementoStore},
      {"(b) memento -> second CAS", DsKind::kMsqCas, Label::kCasAfterMementoStore, Label::kCasAfterSecondCas},
      {"(b) memento -> second CAS [stack]", DsKind::kStack, Label::kCasAfterMementoStore,
       Label::kCasAfterSecondCas},
      {"(c) insdel repl CAS -> location CAS", DsKind::kMsqIndel, Label::kDelAfterReplCas, Label::kDelAfterLocCas},
      {"(c) insdel repl CAS -> location CAS [vol]", DsKind::kMsqVol, Label::kDelAfterReplCas,
       Label::kDelAfterLocCas},
      {"(d) checkpoint buffer -> ts [cas]", DsKind::kMsqCas, Label::kCkptAfterBuf, Label::kCkptAfterTs},
      {"(d) checkpoint buffer -> ts [indel]", DsKind::kMsqIndel, Label::kCkptAfterBuf, Label::kCkptAfterTs},
      {"(e) smr unpin batch flush [indel]", DsKind::kMsqIndel, Label::kUnpinBegin, Label::kUnpinEnd},
      {"(e) smr unpin batch flush [vol]", DsKind::kMsqVol, Label::kUnpinBegin, Label::kUnpinEnd},
  };
  bool all_ok = true;
  for (const Case& c : cases) {
    WindowTally t;
    for (bool reverse : {false, true}) {
      for (Workload w : {Workload::kPair, Workload::kEnq50}) {
        sweep_window(ds_scenario(c.kind, 2, 3, w, reverse), c.from, c.to, t, 12);
      }
    }
    const bool ok = t.windows > 0 && t.failures.empty();
    all_ok = all_ok && ok;
    std::printf("  window %-44s windows %3llu crash points %5llu images %6llu failures %zu%s%s\n", c.name,
                static_cast<unsigned long long>(t.windows), static_cast<unsigned long long>(t.points),
                static_cast<unsigned long long>(t.images), t.failures.size(), t.failures.empty() ? "" : ": ",
                first(t.failures).c_str());
  }

  // Helping during recovery needs a helper that gives up quickly.
  {
    Config impatient;
    impatient.patience = 4;
    WindowTally t;
    sweep_window(ds_scenario(DsKind::kMsqCas, 3, 2, Workload::kPair, true, impatient), Label::kCasAfterFirstCas,
                 Label::kCasAfterFlushLoc, t, 16);
    sweep_window(ds_scenario(DsKind::kMsqIndel, 3, 2, Workload::kPair, true, impatient), Label::kDelAfterReplCas,
                 Label::kDelAfterLocCas, t, 16);
    const bool ok = t.windows > 0 && t.failures.empty();
    all_ok = all_ok && ok;
    std::printf("  window %-44s windows %3llu crash points %5llu images %6llu failures %zu%s%s\n",
                "helped recovery (patience 4)", static_cast<unsigned long long>(t.windows),
                static_cast<unsigned long long>(t.points), static_cast<unsigned long long>(t.images),
                t.failures.size(), t.failures.empty() ? "" : ": ", first(t.failures).c_str());
  }

  {
    WindowTally t;
    sweep_window(failed_cas_scenario(), Label::kCasAfterFail, Label::kOpBegin, t, 1);
    const bool ok = t.windows > 0 && t.failures.empty();
    all_ok = all_ok && ok;
    std::printf("  window %-44s windows %3llu crash points %5llu images %6llu failures %zu%s%s\n",
                "failed CAS -> next step", static_cast<unsigned long long>(t.windows),
                static_cast<unsigned long long>(t.points), static_cast<unsigned long long>(t.images),
                t.failures.size(), t.failures.empty() ? "" : ": ", first(t.failures).c_str());
  }

  const Label states[] = {Label::kCasRecNormal,   Label::kCasRecFail,       Label::kCasRecResume33,
                          Label::kCasRecResume34, Label::kCasRecResume36,   Label::kCasRecNotLast,
                          Label::kCasRecStale,    Label::kDelRecErr,        Label::kDelRecResume,
                          Label::kInsRecContained, Label::kInsRecSpurious};
  std::string missed, hits;
  for (Label l : states) {
    hits += std::string(" ") + std::string(label_name(l)) + "=" + std::to_string(coverage::count(l));
    if (coverage::count(l) == 0) missed += std::string(" ") + std::string(label_name(l));
  }
  std::printf("  recovery states:%s\n", hits.c_str());
  report("C3", all_ok && missed.empty(),
         std::string("enumerated crash windows (a)-(e), every dirty-line subset; recovery states covered ") +
             std::to_string(std::size(states) - std::count(missed.begin(), missed.end(), ' ')) + "/" +
             std::to_string(std::size(states)) + (missed.empty() ? "" : ", missing:" + missed));
}

// ---------------------------------------------------------------------------
// 4. HELP invariant.

constexpr MementoField kHelpFields[] = {{"cas", MementoField::Kind::kCas, 0, 0, 0, "help"}};

struct HelpRun {
  std::uint64_t helps = 0;
  std::uint64_t cas = 0;
  std::vector<std::string> violations;
};

// P threads race detectable CASes over a few shared words. Every desired
// value is unique, so each annotated word names exactly one CAS.
HelpRun help_run(std::uint64_t seed, bool scripted, std::uint32_t threads, std::uint64_t per_thread,
                 std::uint64_t patience) {
  auto pool = pmem::PmemPool::create_anonymous(1 << 20, 8);
  Instance::format_raw(*pool, kHelpFields, threads);
  pool->persist_all();
  HelpTracker tracker(threads);
  AppOptions opts;
  opts.raw_table = kHelpFields;
  opts.config.patience = patience;
  opts.tracer = &tracker;
  Instance inst(*pool, opts);
  const Offset locs = inst.alloc().allocate();
  for (Offset w = 0; w < pmem::kLineSize; w += 8) pool->store_word(locs + w, 0);
  pool->persist_all();
  HelpRun out;
  std::vector<std::uint64_t> helps(threads, 0);
  auto body = [&](std::uint32_t tid) {
    ThreadCtx ctx(inst.env(), tid);
    std::mt19937_64 rng(seed * 131 + tid);
    const Offset mmt = inst.record(tid).body();
    for (std::uint64_t i = 0; i < per_thread; ++i) {
      const Offset loc = locs + 8 * (rng() % 2);
      const std::uint64_t desired = casword::make(0, (static_cast<std::uint64_t>(tid + 1) << 32) | (i + 1));
      for (;;) {
        const std::uint64_t old = dcas::load(ctx, loc);
        if (dcas::cas(ctx, loc, old, desired, mmt).ok) break;
      }
    }
    helps[tid] = ctx.helps;
  };
  if (scripted) {
    ScriptedScheduler sched(seed);
    pool->set_hook(&sched);
    std::vector<std::function<void()>> bodies;
    for (std::uint32_t t = 0; t < threads; ++t) bodies.emplace_back([&body, t] { body(t); });
    sched.run(std::move(bodies));
    pool->set_hook(nullptr);
  } else {
    std::vector<std::thread> ts;
    for (std::uint32_t t = 0; t < threads; ++t) ts.emplace_back(body, t);
    for (auto& t : ts) t.join();
  }
  for (auto h : helps) out.helps += h;
  out.cas = tracker.installed();
  out.violations = tracker.check([&](Parity p, std::uint32_t tid) { return inst.arrays().help(p, tid); });
  return out;
}

void help_invariant() {
  std::uint64_t scripted_helps = 0, stress_helps = 0, cas = 0, violations = 0;
  std::string why;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    HelpRun r = help_run(seed, true, 3, 60, 2 + seed % 5);
    scripted_helps += r.helps;
    cas += r.cas;
    violations += r.violations.size();
    if (why.empty() && !r.violations.empty()) why = "scripted seed " + std::to_string(seed) + ": " + r.violations[0];
  }
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    HelpRun r = help_run(seed, false, 4, 2000, 3);
    stress_helps += r.helps;
    cas += r.cas;
    violations += r.violations.size();
    if (why.empty() && !r.violations.empty()) why = "stress seed " + std::to_string(seed) + ": " + r.violations[0];
  }
  report("C4", violations == 0 && scripted_helps > 0,
         "HELP invariant: 30 scripted stall/help runs + 50 stress runs, " + std::to_string(cas) + " CASes, " +
             std::to_string(scripted_helps) + " scripted helps, " + std::to_string(stress_helps) +
             " stress helps, violations " + std::to_string(violations) + (why.empty() ? "" : "; " + why));
}

// ---------------------------------------------------------------------------
// 5. Bug switch: dropping the deferred flush of the location on the delete
// path lets a crash image reference a freed block.

// One thread dequeues a prefilled queue. Without enqueues nothing else
// flushes the head line, so only the delete path can persist it.
EnumScenario drain_scenario(Config algo, std::uint64_t n) {
  EnumScenario sc;
  sc.options.config = algo;
  sc.make_pool = [n] {
    auto pool = pmem::PmemPool::create_anonymous(4 << 20, 2);
    Instance::format(*pool, DsKind::kMsqIndel, 1, n);
    pool->persist_all();
    return pool;
  };
  sc.script = [n](Instance& inst, HistoryLog&) {
    ThreadCtx ctx(inst.env(), 0);
    for (std::uint64_t i = 0; i < n; ++i) inst.remove_op(ctx, i);
  };
  sc.recover = [n](Instance& inst, HistoryLog&) {
    ThreadCtx ctx(inst.env(), 0, true);
    while (inst.record(0).op_index() < n) inst.remove_op(ctx, inst.record(0).op_index());
  };
  sc.check = [](Instance& inst, const HistoryLog& log) -> std::string {
    return first(verify_exactly_once(log.records(), inst.container()->traverse()));
  };
  return sc;
}

void bug_switch() {
  auto count = [](bool bug, std::uint64_t& points) {
    Config cfg;
    cfg.skip_delete_flush = bug;
    const std::uint64_t n = 40;
    EnumScenario sc = drain_scenario(cfg, n);
    std::uint64_t uaf = 0;
    // The reclaimer runs every 16th unpin; crash right after each run.
    for (std::uint64_t hit = 16; hit <= n; hit += 16) {
      EnumReport rep = enumerate_crash_window(sc, Label::kUnpinEnd, Label::kOpBegin, hit);
      points += rep.crash_points;
      for (const auto& f : rep.failures) uaf += f.find("is free") != std::string::npos;
    }
    return uaf;
  };
  std::uint64_t p_bug = 0, p_fix = 0;
  const std::uint64_t with_bug = count(true, p_bug);
  const std::uint64_t with_fix = count(false, p_fix);
  report("C5", with_bug >= 1 && with_fix == 0,
         "bug switch (skip delete-path location flush): freed-block references found with switch on " +
             std::to_string(with_bug) + " (" + std::to_string(p_bug) + " crash points), with fix " +
             std::to_string(with_fix) + " (" + std::to_string(p_fix) + " crash points)");
}

// ---------------------------------------------------------------------------
// 6. Linearizability of short crash histories.

LinOp L(std::int32_t tid, bool ins, std::uint64_t v, std::uint64_t inv, std::uint64_t res) {
  return LinOp{tid, ins, v, inv, res};
}

void linearizability() {
  std::uint64_t accepted = 0, fragments = 0, crashes = 0;
  std::string why;
  std::uint64_t seed = 0;
  while (fragments < 1000) {
    ++seed;
    const DsKind k = kQueues[seed % 3];
    RunConfig cfg;
    cfg.spec.ds = k;
    cfg.spec.threads = 1 + seed % 3;
    cfg.spec.ops = cfg.spec.threads == 1 ? 8 : cfg.spec.threads == 2 ? 4 : 2;
    cfg.spec.workload = Workload::kEnq50;
    cfg.spec.prefill = 2;
    cfg.spec.seed = seed;
    cfg.mode = Mode::kScripted;
    cfg.crash_step_range = 150;
    cfg.plan = CrashPlan::parse(seed % 2 ? "kind=full_system; count=1; model=per_line_random"
                                         : "kind=full_system; count=2");
    RunResult r = run(cfg);
    if (!r.ok()) {
      ++fragments;
      if (why.empty()) why = "run failed, seed " + std::to_string(seed) + ": " + r.errors.front();
      continue;
    }
    crashes += r.full_crashes;
    auto ops = logical_ops(r.log.records());
    if (ops.size() > 8) continue;
    ++fragments;
    std::string w;
    if (linearizable(ops, true, {prefill_value(0), prefill_value(1)}, &w)) {
      ++accepted;
    } else if (why.empty()) {
      why = "seed " + std::to_string(seed) + ": " + w;
    }
  }

  const std::uint64_t a = 1, b = 2, c = 3;
  const std::uint64_t E = ds::kEmpty;
  const std::vector<std::vector<LinOp>> bad = {
      {L(0, true, a, 0, 1), L(0, true, b, 2, 3), L(1, false, b, 4, 5)},                        // overtaking
      {L(0, true, a, 0, 1), L(1, false, a, 2, 3), L(2, false, a, 4, 5)},                       // duplicate
      {L(0, false, c, 0, 1)},                                                                  // phantom
      {L(0, true, a, 0, 1), L(1, false, E, 2, 3)},                                             // false empty
      {L(0, true, a, 0, 1), L(0, true, b, 2, 3), L(1, false, a, 4, 5), L(1, false, E, 6, 7)},  // lost b
      {L(0, true, a, 0, 1), L(1, false, b, 2, 3), L(0, true, b, 4, 5)},                        // deq before enq
      {L(0, true, a, 0, 1), L(0, true, b, 2, 3), L(0, true, c, 4, 5), L(1, false, a, 6, 7),
       L(1, false, c, 8, 9)},                                                                  // skip middle
      {L(0, true, a, 0, 3), L(1, true, b, 1, 2), L(2, false, a, 4, 5), L(2, false, a, 6, 7)},  // overlap + dup
      {L(0, true, a, 0, 1), L(1, true, b, 2, 3), L(2, false, b, 4, 5), L(2, false, a, 6, 7)},  // cross-thread order
      {L(0, false, b, 0, 1)},                                                                  // wrong initial head
  };
  std::uint64_t rejected = 0;
  for (std::size_t i = 0; i < bad.size(); ++i) {
    const std::vector<std::uint64_t> init = i + 1 == bad.size() ? std::vector<std::uint64_t>{a, b} : std::vector<std::uint64_t>{};
    rejected += !linearizable(bad[i], true, init);
  }
  report("C6", accepted == fragments && fragments >= 1000 && rejected == bad.size(),
         "linearizability: " + std::to_string(accepted) + "/" + std::to_string(fragments) +
             " crash-run histories (<=8 ops, <=3 threads, " + std::to_string(crashes) + " crashes) accepted; " +
             std::to_string(rejected) + "/" + std::to_string(bad.size()) + " fabricated FIFO violations rejected" +
             (why.empty() ? "" : "; " + why));
}

// ---------------------------------------------------------------------------
// 7. Space: a detectable-CAS location and its memento are one word each,
// whatever the thread count.
constexpr MementoField kSpaceFields[] = {{"pad", MementoField::Kind::kCheckpoint, 0, 3, 0, "space"},
                                         {"cas", MementoField::Kind::kCas, 64, 0, 0, "space"},
                                         {"pad2", MementoField::Kind::kCheckpoint, 72, 3, 0, "space"}};

void space_claim() {
  std::string detail;
  bool ok = dcas::kLocationBytes == 8 && dcas::kMementoBytes == 8;
  for (std::uint32_t p : {4u, 64u}) {
    auto pool = pmem::PmemPool::create_anonymous(4 << 20, p);
    Instance::format_raw(*pool, kSpaceFields, p);
    pool->persist_all();
    AppOptions opts;
    opts.raw_table = kSpaceFields;
    Instance inst(*pool, opts);
    const Offset region = inst.alloc().allocate();
    for (Offset w = 0; w < pmem::kLineSize; w += 8) pool->store_word(region + w, 0);
    const Offset loc = region + 24;
    pool->persist_all();
    const Offset body = inst.record(p - 1).body();
    const std::size_t body_bytes = memento_table_bytes(kSpaceFields);
    auto snap = [&](Offset base, std::size_t bytes) {
      std::vector<std::uint64_t> v;
      for (Offset w = 0; w < bytes; w += 8) v.push_back(pool->load_word(base + w));
      return v;
    };
    auto diff_bytes = [](const std::vector<std::uint64_t>& x, const std::vector<std::uint64_t>& y) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        std::uint64_t d = x[i] ^ y[i];
        for (int b = 0; b < 8; ++b) n += ((d >> (8 * b)) & 0xff) != 0 ? 1 : 0;
      }
      return n;
    };
    auto words_changed = [](const std::vector<std::uint64_t>& x, const std::vector<std::uint64_t>& y) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < x.size(); ++i) n += x[i] != y[i];
      return n;
    };
    const auto body0 = snap(body, body_bytes), loc0 = snap(region, pmem::kLineSize);
    ThreadCtx ctx(inst.env(), p - 1);
    std::uint64_t cur = 0;
    std::size_t max_loc_words = 0, max_mmt_words = 0, max_loc_span = 0;
    for (std::uint64_t i = 1; i <= 20; ++i) {
      const auto b = snap(body, body_bytes), l = snap(region, pmem::kLineSize);
      const std::uint64_t next = casword::make(i % 512, 0xfff000 + 64 * i);
      if (!dcas::cas(ctx, loc, cur, next, body + 64).ok) ok = false;
      cur = next;
      max_loc_words = std::max(max_loc_words, words_changed(l, snap(region, pmem::kLineSize)));
      max_mmt_words = std::max(max_mmt_words, words_changed(b, snap(body, body_bytes)));
      max_loc_span = std::max(max_loc_span, diff_bytes(l, snap(region, pmem::kLineSize)));
    }
    (void)body0;
    (void)loc0;
    ok = ok && max_loc_words == 1 && max_mmt_words == 1 && max_loc_span <= 8;
    detail += " P=" + std::to_string(p) + ": location words touched " + std::to_string(max_loc_words) +
              ", memento words touched " + std::to_string(max_mmt_words) + ";";
  }
  report("C7", ok,
         "space: location " + std::to_string(dcas::kLocationBytes) + " B, memento " +
             std::to_string(dcas::kMementoBytes) + " B;" + detail);
}

// ---------------------------------------------------------------------------
// 8. Flush economy.
constexpr MementoField kLineFields[] = {{"ck", MementoField::Kind::kCheckpoint, 0, 3, 0, "line"}};

void flush_economy() {
  std::map<DsKind, std::uint64_t> flushes;
  std::map<DsKind, std::uint64_t> ops;
  bool runs_ok = true;
  for (DsKind k : kQueues) {
    RunConfig cfg;
    cfg.spec.ds = k;
    cfg.spec.threads = 8;
    cfg.spec.ops = 500;
    cfg.spec.seed = 7;
    cfg.spec.workload = Workload::kPair;
    cfg.mode = Mode::kScripted;
    RunResult r = run(cfg);
    runs_ok = runs_ok && r.ok();
    flushes[k] = r.flushes;
  }
  const auto per = [&](DsKind k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(flushes[k]) / (8.0 * 500));
    return std::string(buf);
  };
  const bool order = flushes[DsKind::kMsqVol] < flushes[DsKind::kMsqIndel] &&
                     flushes[DsKind::kMsqIndel] <= flushes[DsKind::kMsqCas];

  auto pool = pmem::PmemPool::create_anonymous(1 << 20, 2);
  Instance::format_raw(*pool, kLineFields, 1);
  pool->persist_all();
  AppOptions opts;
  opts.raw_table = kLineFields;
  Instance inst(*pool, opts);
  ThreadCtx ctx(inst.env(), 0);
  Checkpoint<3> ck(inst.record(0).body());
  std::uint64_t max_ck = 0, min_ck = ~0ull;
  for (std::uint64_t i = 0; i < 10; ++i) {
    pool->reset_stats();
    ck.run(ctx, {i, i + 1, i + 2});
    max_ck = std::max(max_ck, pool->stats().flushes);
    min_ck = std::min(min_ck, pool->stats().flushes);
  }
  const bool line_ok = !ck.spans_lines() && max_ck == 1 && min_ck == 1;
  report("C8", runs_ok && order && line_ok,
         "flush economy (pair, 8 threads, seed 7, flushes per pair op): msq-vol " + per(DsKind::kMsqVol) +
             " < msq-indel " + per(DsKind::kMsqIndel) + " <= msq-cas " + per(DsKind::kMsqCas) +
             "; single-line checkpoint flushes " + std::to_string(max_ck));
}

// ---------------------------------------------------------------------------
// 9. Clock calibration across reboots with the raw counter reset.

// Independent scan of every timestamp-carrying word of a pool.
Timestamp scan_max_ts(const pmem::PmemPool& pool, DsKind kind, std::uint32_t threads) {
  const auto& lay = pool.layout();
  Timestamp m = 0;
  for (std::uint32_t i = 0; i < 2 * lay.max_threads; ++i) m = std::max(m, pool.peek_word(lay.help_offset + 8 * i));
  for (std::uint32_t t = 0; t < threads; ++t) {
    const Offset line = lay.clearing_offset + 64 * t;
    m = std::max(m, pool.peek_word(line + 16) & kTsMask);
    m = std::max(m, pool.peek_word(line + 32));
    const Offset body = pool.peek_word(line + 24);
    for (const auto& f : ds::memento_fields(kind)) {
      for (Offset w : f.ts_words(body)) {
        const std::uint64_t v = pool.peek_word(w);
        m = std::max(m, f.kind == MementoField::Kind::kCas ? (v & kTsMask) : v);
      }
    }
  }
  return m;
}

struct FirstTs : Tracer {
  Timestamp first = 0;
  std::uint64_t checkpoints = 0;
  int crash_at = -1;
  pmem::PmemPool* pool = nullptr;
  void on_checkpoint(ThreadCtx&, Offset, Timestamp ts) override {
    if (first == 0) first = ts;
    if (static_cast<int>(++checkpoints) == crash_at) pool->request_crash();
  }
};

void calibration() {
  const DsKind kind = DsKind::kMsqCas;
  const std::uint32_t threads = 2;
  auto pool = pmem::PmemPool::create_anonymous(4 << 20, 4);
  Instance::format(*pool, kind, threads, 4);
  pool->persist_all();
  WorkloadSpec spec;
  spec.ds = kind;
  spec.threads = threads;
  spec.ops = 1000;
  bool ok = true;
  std::string detail;
  Timestamp prev_max = 0;
  for (int boot = 0; boot <= 3; ++boot) {
    FirstTs tr;
    tr.pool = pool.get();
    tr.crash_at = 25 + 7 * boot;
    AppOptions opts;
    opts.tracer = &tr;
    opts.raw_clock_start = 1;  // the raw counter restarts on every boot
    auto inst = std::make_unique<Instance>(*pool, opts);
    if (boot > 0) {
      const Timestamp now = inst->clock().now();
      ok = ok && now > prev_max;
      detail += " boot " + std::to_string(boot) + ": persisted max " + std::to_string(prev_max) + ", next ts " +
                std::to_string(now) + ";";
    }
    if (boot == 3) break;
    try {
      std::vector<ThreadCtx> ctx;
      for (std::uint32_t t = 0; t < threads; ++t) ctx.emplace_back(inst->env(), t, true);
      for (std::uint64_t i = 0; i < spec.ops; ++i) {
        for (std::uint32_t t = 0; t < threads; ++t) inst->workload_op(ctx[t], spec, inst->record(t).op_index());
      }
    } catch (const pmem::SystemCrash&) {
    }
    if (boot > 0) ok = ok && tr.first > prev_max;
    pool->discard_pending();
    pmem::Image img = pool->crash(pmem::CrashModel::revert_all_dirty()).image(0);
    inst.reset();
    pool = pmem::PmemPool::from_image(img);
    prev_max = scan_max_ts(*pool, kind, threads);
    ok = ok && prev_max > 0;
  }
  report("C9", ok, "clock calibration across 3 reboots with raw counter reset:" + detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only(argv + 1, argv + argc);
  auto want = [&](const char* id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  if (want("C1")) full_crash_exactly_once();
  if (want("C2")) thread_crashes();
  if (want("C3")) enumerated_windows();
  if (want("C4")) help_invariant();
  if (want("C5")) bug_switch();
  if (want("C6")) linearizability();
  if (want("C7")) space_claim();
  if (want("C8")) flush_economy();
  if (want("C9")) calibration();
  std::printf("%s: %d criteria failed\n", g_failed == 0 ? "ALL PASS" : "FAILURES", g_failed);
  return g_failed == 0 ? 0 : 1;
}
