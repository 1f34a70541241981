#include <gtest/gtest.h>

#include <random>

#include "mmtk/checkpoint.hpp"
#include "rig.hpp"

using namespace mmtk;
using mmtk::test::Rig;

namespace {

std::uint64_t flushes(Rig& rig) { return rig.pool->stats().flushes; }

}  // namespace

TEST(Checkpoint, FreshMementoStoresValue) {
  Rig rig;
  ThreadCtx ctx(rig.env(), 0);
  Checkpoint<1> ck(rig.body() + test::kCk1);
  EXPECT_FALSE(ck.peek(*rig.pool).has_value());
  auto r = ck.run(ctx, {42});
  EXPECT_EQ(r.value[0], 42u);
  EXPECT_FALSE(r.detected);
  auto p = ck.peek(*rig.pool);
  ASSERT_TRUE(p.has_value());
  EXPECT_GT(p->first, 0u);
  EXPECT_EQ(p->second[0], 42u);
}

TEST(Checkpoint, SingleLinePairFlushesOnce) {
  Rig rig;
  ThreadCtx ctx(rig.env(), 0);
  ASSERT_FALSE(Checkpoint<3>(rig.body() + test::kCk3).spans_lines());
  for (std::uint64_t v = 0; v < 5; ++v) {
    rig.pool->reset_stats();
    Checkpoint<3>(rig.body() + test::kCk3).run(ctx, {v, v, v});
    EXPECT_EQ(flushes(rig), 1u);
    rig.pool->reset_stats();
    Checkpoint<1>(rig.body() + test::kCk1).run(ctx, {v});
    EXPECT_EQ(flushes(rig), 1u);
  }
}

TEST(Checkpoint, StraddlingPairAlsoFlushesBuffer) {
  Rig rig;
  ThreadCtx ctx(rig.env(), 0);
  Checkpoint<3> ck(rig.body() + test::kCk3x);
  ASSERT_TRUE(ck.spans_lines());
  rig.pool->reset_stats();
  ck.run(ctx, {1, 2, 3});
  EXPECT_GT(flushes(rig), 1u);
}

TEST(Checkpoint, SlotsAlternate) {
  Rig rig;
  ThreadCtx ctx(rig.env(), 0);
  Checkpoint<1> ck(rig.body() + test::kCk1);
  ck.run(ctx, {7});
  ck.run(ctx, {9});
  EXPECT_EQ(ck.peek(*rig.pool)->second[0], 9u);
  // Oracle: both slots written, the one with the larger ts holds 9.
  const Timestamp t0 = rig.pool->load_word(ck.ts_offset(0)), t1 = rig.pool->load_word(ck.ts_offset(1));
  ASSERT_GT(t0, 0u);
  ASSERT_GT(t1, 0u);
  ASSERT_NE(t0, t1);
  const int newer = t1 > t0 ? 1 : 0;
  EXPECT_EQ(rig.pool->load_word(ck.ts_offset(newer) + 8), 9u);
  EXPECT_EQ(rig.pool->load_word(ck.ts_offset(1 - newer) + 8), 7u);
}

TEST(Checkpoint, ReexecutionReplaysStoredValue) {
  Rig rig;
  {
    ThreadCtx ctx(rig.env(), 0);
    Checkpoint<1>(rig.body() + test::kCk1).run(ctx, {1234});
  }
  rig.crash_and_reboot();
  ThreadCtx ctx(rig.env(), 0, true);
  int evaluated = 0;
  auto r = Checkpoint<1>(rig.body() + test::kCk1).run_with(ctx, [&] {
    ++evaluated;
    return std::array<std::uint64_t, 1>{999};
  });
  EXPECT_TRUE(r.detected);
  EXPECT_EQ(r.value[0], 1234u);
  EXPECT_EQ(evaluated, 0);
}

// The contrived loop: checkpoints with timestamps 10, 40, 20 before a crash.
// Re-execution replays the first two steps (10 and 40 each exceed LOCAL in
// turn) and resumes normal execution at the step whose timestamp stopped
// increasing.
TEST(Checkpoint, ContrivedLoopExample) {
  Rig rig;
  pmem::PmemPool& pool = *rig.pool;
  const Offset a = rig.body() + test::kCk1, b = rig.body() + test::kCk3, c = rig.body() + test::kCk3x;
  pool.store_word(a, 10);
  pool.store_word(a + 8, 100);
  pool.store_word(b, 40);
  pool.store_word(b + 8, 400);
  pool.store_word(c, 20);
  pool.store_word(c + 8, 200);
  pool.persist_all();
  rig.crash_and_reboot();
  ThreadCtx ctx(rig.env(), 0, true);
  auto r1 = Checkpoint<1>(a).run(ctx, {1});
  auto r2 = Checkpoint<3>(b).run(ctx, {2, 0, 0});
  auto r3 = Checkpoint<3>(c).run(ctx, {3, 0, 0});
  EXPECT_TRUE(r1.detected);
  EXPECT_EQ(r1.value[0], 100u);
  EXPECT_TRUE(r2.detected);
  EXPECT_EQ(r2.value[0], 400u);
  EXPECT_FALSE(r3.detected);
  EXPECT_EQ(r3.value[0], 3u);
  EXPECT_GT(Checkpoint<3>(c).peek(*rig.pool)->first, 40u);
}

TEST(Checkpoint, ClearIsIdempotent) {
  Rig rig;
  ThreadCtx ctx(rig.env(), 0);
  Checkpoint<1> ck(rig.body() + test::kCk1);
  ck.clear(*rig.pool);
  EXPECT_FALSE(ck.peek(*rig.pool).has_value());
  ck.run(ctx, {5});
  ck.clear(*rig.pool);
  EXPECT_FALSE(ck.peek(*rig.pool).has_value());
  ck.clear(*rig.pool);
  EXPECT_FALSE(ck.peek(*rig.pool).has_value());
  EXPECT_EQ(rig.pool->dirty_line_count(), 0u);
}

// Crash between buffer and timestamp writes: every image either ignores the
// partial buffer (re-run stores the new value) or has the full old value.
TEST(Checkpoint, CrashBetweenBufferAndTimestamp) {
  for (bool straddle : {false, true}) {
    Rig rig;
    const Offset base = rig.body() + (straddle ? test::kCk3x : test::kCk3);
    {
      ThreadCtx ctx(rig.env(), 0);
      Checkpoint<3>(base).run(ctx, {7, 7, 7});
    }
    rig.pool->persist_all();
    struct StopAt : Tracer {
      void on_point(ThreadCtx&, Label l) override {
        if (l == Label::kCkptAfterBuf) throw ThreadCrash{};
      }
    } stop;
    rig.inst->set_tracer(&stop);
    {
      ThreadCtx ctx(rig.env(), 0);
      EXPECT_THROW(Checkpoint<3>(base).run(ctx, {8, 8, 8}), ThreadCrash);
    }
    auto set = rig.pool->crash(pmem::CrashModel::enumerate());
    ASSERT_GE(set.size(), 1u);
    for (std::size_t i = 0; i < set.size(); ++i) {
      auto pool = pmem::PmemPool::from_image(set.image(i));
      harness::Instance inst(*pool, rig.opts);
      Checkpoint<3> ck(base);
      auto seen = ck.peek(*pool);
      ASSERT_TRUE(seen.has_value());
      // Never torn: the latest slot holds exactly the old value.
      EXPECT_EQ(seen->second, (std::array<std::uint64_t, 3>{7, 7, 7}));
      ThreadCtx ctx(inst.env(), 0, true);
      // The pre-crash step never finished, so 99 is stored and returned.
      // LOCAL starts at 0 so the old checkpoint is "detected" unless the
      // root op clears it first; emulate a fresh op after a clear.
      inst.record(0).clear(nullptr, 1);
      auto r = Checkpoint<3>(base).run(ctx, {99, 99, 99});
      EXPECT_FALSE(r.detected);
      EXPECT_EQ(r.value[0], 99u);
      EXPECT_EQ(Checkpoint<3>(base).peek(*pool)->second[0], 99u);
    }
  }
}

// Exactly-once stabilization: run with fresh random values; after any crash
// the re-executed step returns the persisted value if its ts persisted.
TEST(Checkpoint, ExactlyOnceStabilization) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    Rig rig;
    const Offset base = rig.body() + test::kCk1;
    std::uint64_t first = 0;
    {
      ThreadCtx ctx(rig.env(), 0);
      first = Checkpoint<1>(base).run_with(ctx, [&] { return std::array<std::uint64_t, 1>{rng()}; }).value[0];
    }
    auto model = pmem::CrashModel::per_line_random(rng());
    rig.crash_and_reboot(model);
    ThreadCtx ctx(rig.env(), 0, true);
    auto r = Checkpoint<1>(base).run_with(ctx, [&] { return std::array<std::uint64_t, 1>{rng()}; });
    EXPECT_TRUE(r.detected);
    EXPECT_EQ(r.value[0], first);
  }
}
