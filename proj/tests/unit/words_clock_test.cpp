#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <thread>

#include "mmtk/clock.hpp"
#include "mmtk/words.hpp"
#include "rig.hpp"

using namespace mmtk;
using mmtk::test::Rig;

TEST(Words, CasWordBitLayout) {
  // Hand-assembled oracle: parity 63, tid 62..54, tag 53..45, offset 44..0.
  const std::uint64_t w = casword::encode(Parity::kOdd, 5, casword::make(0x1ab, 0x123456789));
  EXPECT_EQ(w, (1ull << 63) | (5ull << 54) | (0x1abull << 45) | 0x123456789ull);
  EXPECT_EQ(casword::parity(w), Parity::kOdd);
  EXPECT_EQ(casword::raw_tid(w), 5u);
  EXPECT_EQ(casword::tag(w), 0x1abu);
  EXPECT_EQ(casword::offset(w), 0x123456789u);
  EXPECT_FALSE(casword::is_stable(w));
  EXPECT_TRUE(casword::is_stable(casword::stable(w)));
}

TEST(Words, CasWordRoundTrip) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const Parity p = (rng() & 1) ? Parity::kOdd : Parity::kEven;
    const std::uint64_t tid = rng() % 512, tag = rng() % 512, off = rng() & pmem::kOffsetMask;
    const std::uint64_t w = casword::encode(p, tid, casword::make(tag, off));
    ASSERT_EQ(casword::parity(w), p);
    ASSERT_EQ(casword::raw_tid(w), tid);
    ASSERT_EQ(casword::tag(w), tag);
    ASSERT_EQ(casword::offset(w), off);
  }
  EXPECT_THROW(casword::make(512, 0), std::out_of_range);
  EXPECT_THROW(casword::make(0, 1ull << 45), std::out_of_range);
  EXPECT_THROW(encode_tid(kMaxTid + 1), std::out_of_range);
}

TEST(Words, CasMementoBitLayout) {
  const std::uint64_t m = casmmt::encode(Parity::kOdd, true, 0x2a);
  EXPECT_EQ(m, (1ull << 63) | (1ull << 62) | 0x2aull);
  EXPECT_EQ(casmmt::parity(m), Parity::kOdd);
  EXPECT_TRUE(casmmt::fail(m));
  EXPECT_EQ(casmmt::ts(m), 0x2au);
  EXPECT_EQ(casmmt::ts(casmmt::encode(Parity::kEven, false, kTsMask)), kTsMask);
}

TEST(Words, InsDelAndReplLayouts) {
  const std::uint64_t v = indelword::make(0x3ff, 0x1000);
  const std::uint64_t w = indelword::encode(true, v);
  EXPECT_EQ(w, (1ull << 63) | (0x3ffull << 45) | 0x1000ull);
  EXPECT_TRUE(indelword::persist(w));
  EXPECT_EQ(indelword::reserved(w), 0u);
  EXPECT_EQ(indelword::stable(w), v);
  const std::uint64_t r = replword::encode(7, v);
  EXPECT_EQ(r, (7ull << 55) | (0x3ffull << 45) | 0x1000ull);
  EXPECT_EQ(replword::raw_tid(r), 7u);
  EXPECT_EQ(replword::tag(r), 0x3ffu);
  EXPECT_EQ(replword::offset(r), 0x1000u);
  EXPECT_THROW(indelword::make(1024, 0), std::out_of_range);
}

TEST(Clock, StrictlyIncreasingAndNeverZero) {
  Clock c;
  Timestamp prev = c.now();
  EXPECT_GT(prev, 0u);
  for (int i = 0; i < 1000; ++i) {
    Timestamp t = c.now();
    ASSERT_GT(t, prev);
    prev = t;
  }
}

TEST(Clock, RacingThreadsGetDistinctValues) {
  Clock c;
  std::vector<std::vector<Timestamp>> got(4);
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i) {
    ts.emplace_back([&, i] {
      for (int k = 0; k < 5000; ++k) got[i].push_back(c.now());
    });
  }
  for (auto& t : ts) t.join();
  std::set<Timestamp> all;
  for (auto& v : got) all.insert(v.begin(), v.end());
  EXPECT_EQ(all.size(), 20000u);
}

TEST(Clock, OverflowIsReported) {
  Clock c;
  c.calibrate(kTsMask - 2);
  EXPECT_EQ(c.now(), kTsMask - 1);
  EXPECT_EQ(c.now(), kTsMask);
  EXPECT_THROW(c.now(), TimestampOverflow);
}

TEST(Clock, CalibrateAfterRawRestart) {
  Clock c(3);  // raw counter restarted near zero
  c.calibrate(500);
  EXPECT_GT(c.now(), 500u);
}

TEST(Clock, FreshPoolStartsAboveZero) {
  Rig rig;
  EXPECT_EQ(rig.inst->boot_max_timestamp(), 0u);
  EXPECT_GT(rig.inst->clock().now(), 0u);
}

TEST(Clock, InitOwnTakesLargestSuccessfulMemento) {
  Rig rig;
  GlobalArrays& a = rig.inst->arrays();
  std::vector<std::uint64_t> words = {casmmt::encode(Parity::kOdd, false, 10), casmmt::encode(Parity::kEven, false, 40),
                                      casmmt::encode(Parity::kOdd, false, 20),
                                      casmmt::encode(Parity::kEven, true, 90)};
  a.init_own(1, words);
  EXPECT_EQ(a.own(1), casmmt::encode(Parity::kEven, false, 40));
  a.init_own(1, std::vector<std::uint64_t>{});
  EXPECT_EQ(a.own(1), casmmt::encode(Parity::kEven, false, 0));
}

TEST(Clock, HelpCasOnlyRaisesFromExpected) {
  Rig rig;
  GlobalArrays& a = rig.inst->arrays();
  Timestamp exp = 0;
  ASSERT_TRUE(a.cas_help(Parity::kOdd, 2, exp, 7));
  exp = 5;
  EXPECT_FALSE(a.cas_help(Parity::kOdd, 2, exp, 9));
  EXPECT_EQ(exp, 7u);
  EXPECT_EQ(a.help(Parity::kOdd, 2), 7u);
  EXPECT_EQ(a.help(Parity::kEven, 2), 0u);
  EXPECT_EQ(a.max_help(), 7u);
}

TEST(Clock, ThreadIdBeyondPoolIsUsageError) {
  Rig rig(2, {}, 4);
  EXPECT_THROW(rig.inst->arrays().local(4), pmem::UsageError);
  EXPECT_THROW(rig.inst->arrays().help(Parity::kEven, 9), pmem::UsageError);
}

// Boot-time calibration against an independent scan of the raw pool words.
TEST(Clock, BootCalibratesPastEveryPersistedTimestamp) {
  Rig rig;
  pmem::PmemPool& pool = *rig.pool;
  pool.store_word(rig.body(1) + test::kCk3, 500);  // a checkpoint slot ts
  pool.store_word(rig.body(0) + test::kCas1, casmmt::encode(Parity::kOdd, false, 321));
  pool.store_word(pool.layout().help_offset + 8, 450);
  pool.persist_all();
  rig.opts.raw_clock_start = 3;
  rig.crash_and_reboot();
  EXPECT_EQ(rig.inst->boot_max_timestamp(), 500u);
  EXPECT_GT(rig.inst->clock().now(), 500u);
  EXPECT_EQ(casmmt::ts(rig.inst->arrays().own(0)), 321u);
  EXPECT_EQ(rig.inst->arrays().local(0), 0u);
}
