#include "mmtk/ds/queue.hpp"

#include <algorithm>

#include "mmtk/checkpoint.hpp"
#include "mmtk/dcas.hpp"
#include "mmtk/insdel.hpp"
#include "mmtk/smr.hpp"

namespace mmtk::ds {

namespace {

// Field offsets, mirrored from the tables in container.cpp.
namespace cq {
constexpr Offset kNode = 0, kLink = 32, kSwing = 40, kHelpSwing = 48, kTailNext = 64;
constexpr Offset kSnap = 128, kResult = 192, kHead = 224, kDeqSwing = 232;
}  // namespace cq
namespace iq {
constexpr Offset kNode = 0, kSwing = 32, kHelpSwing = 40, kTailNext = 64;
constexpr Offset kSnap = 128, kResult = 192, kDeqSwing = 224;
}  // namespace iq
namespace vq {
constexpr Offset kNode = 0, kTail = 32, kSnap = 64, kResult = 128;
}  // namespace vq

Offset next_of(std::uint64_t node_word) { return (node_word & pmem::kOffsetMask) + node::kNext; }

std::uint64_t finish_remove(ThreadCtx& ctx, Offset result_mmt, Offset succ) {
  std::uint64_t v = ctx.pool().load_word(succ + node::kValue);
  return Checkpoint<1>(result_mmt).run(ctx, {v}).value[0];
}

}  // namespace

std::vector<std::uint64_t> QueueBase::traverse() const {
  auto nodes = chain(env_->pool->load_word(head()) & pmem::kOffsetMask);
  std::vector<std::uint64_t> out;
  for (std::size_t i = 1; i < nodes.size(); ++i) out.push_back(env_->pool->load_word(nodes[i] + node::kValue));
  return out;
}

std::vector<Offset> QueueBase::reachable_blocks() const {
  auto nodes = chain(env_->pool->load_word(head()) & pmem::kOffsetMask);
  Offset t = env_->pool->load_word(tail()) & pmem::kOffsetMask;
  if (t != pmem::kNull && std::find(nodes.begin(), nodes.end(), t) == nodes.end()) nodes.push_back(t);
  return nodes;
}

// ---- msq-cas ---------------------------------------------------------------

void CasQueue::insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) {
  const Offset node = Checkpoint<1>(mmt + cq::kNode).run_with(ctx, [&] {
    return std::array<std::uint64_t, 1>{new_node(ctx, value)};
  }).value[0];
  for (;;) {
    auto snap = Checkpoint<2>(mmt + cq::kTailNext).run_with(ctx, [&] {
      std::uint64_t t = dcas::load(ctx, tail());
      return std::array<std::uint64_t, 2>{t, dcas::load(ctx, next_of(t))};
    });
    const std::uint64_t t = snap.value[0];
    const std::uint64_t nx = snap.value[1];
    if (nx != 0) {
      dcas::cas(ctx, tail(), t, nx, mmt + cq::kHelpSwing);
      continue;
    }
    if (dcas::cas(ctx, next_of(t), 0, node, mmt + cq::kLink).ok) {
      dcas::cas(ctx, tail(), t, node, mmt + cq::kSwing);
      return;
    }
  }
}

std::uint64_t CasQueue::remove(ThreadCtx& ctx, Offset mmt) {
  for (;;) {
    auto snap = Checkpoint<3>(mmt + cq::kSnap).run_with(ctx, [&] {
      std::uint64_t h = dcas::load(ctx, head());
      std::uint64_t t = dcas::load(ctx, tail());
      return std::array<std::uint64_t, 3>{h, t, dcas::load(ctx, next_of(h))};
    });
    const auto [h, t, nx] = snap.value;
    if (h == t) {
      if (nx == 0) return Checkpoint<1>(mmt + cq::kResult).run(ctx, {kEmpty}).value[0];
      dcas::cas(ctx, tail(), t, nx, mmt + cq::kDeqSwing);
      continue;
    }
    if (dcas::cas(ctx, head(), h, nx, mmt + cq::kHead).ok) {
      env_->smr->retire(ctx, h);
      return finish_remove(ctx, mmt + cq::kResult, nx);
    }
  }
}

// ---- msq-indel -------------------------------------------------------------

void IndelQueue::insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) {
  const Offset node = Checkpoint<1>(mmt + iq::kNode).run_with(ctx, [&] {
    return std::array<std::uint64_t, 1>{new_node(ctx, value)};
  }).value[0];
  for (;;) {
    auto snap = Checkpoint<2>(mmt + iq::kTailNext).run_with(ctx, [&] {
      std::uint64_t t = dcas::load(ctx, tail());
      return std::array<std::uint64_t, 2>{t, insdel::load(ctx, next_of(t))};
    });
    const std::uint64_t t = snap.value[0];
    const std::uint64_t nx = snap.value[1];
    if (nx != 0) {
      dcas::cas(ctx, tail(), t, nx, mmt + iq::kHelpSwing);
      continue;
    }
    // A failed or spurious insert retries from a freshly checkpointed tail.
    if (insdel::insert(ctx, next_of(t), node, *this).ok) {
      dcas::cas(ctx, tail(), t, node, mmt + iq::kSwing);
      return;
    }
  }
}

std::uint64_t IndelQueue::remove(ThreadCtx& ctx, Offset mmt) {
  for (;;) {
    auto snap = Checkpoint<3>(mmt + iq::kSnap).run_with(ctx, [&] {
      std::uint64_t h = insdel::load(ctx, head());
      std::uint64_t t = dcas::load(ctx, tail());
      return std::array<std::uint64_t, 3>{h, t, insdel::load(ctx, next_of(h))};
    });
    const auto [h, t, nx] = snap.value;
    if (h == t) {
      if (nx == 0) return Checkpoint<1>(mmt + iq::kResult).run(ctx, {kEmpty}).value[0];
      dcas::cas(ctx, tail(), t, nx, mmt + iq::kDeqSwing);
      continue;
    }
    if (insdel::remove(ctx, head(), h, nx).ok) return finish_remove(ctx, mmt + iq::kResult, nx);
  }
}

// ---- msq-vol ---------------------------------------------------------------

void VolQueue::on_boot() { vtail_.store(env_->pool->load_word(head()) & pmem::kOffsetMask); }

std::vector<Offset> VolQueue::reachable_blocks() const {
  return chain(env_->pool->load_word(head()) & pmem::kOffsetMask);
}

void VolQueue::insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) {
  const Offset node = Checkpoint<1>(mmt + vq::kNode).run_with(ctx, [&] {
    return std::array<std::uint64_t, 1>{new_node(ctx, value)};
  }).value[0];
  for (;;) {
    // The walk needs no memento: it only reads persisted links, and the
    // tail it settles on is checkpointed before use.
    const std::uint64_t t = Checkpoint<1>(mmt + vq::kTail).run_with(ctx, [&] {
      Offset cur = vtail_.load();
      for (;;) {
        std::uint64_t nx = insdel::load(ctx, next_of(cur));
        if (nx == 0) break;
        Offset expected = cur;
        vtail_.compare_exchange_strong(expected, nx);
        cur = nx;
      }
      return std::array<std::uint64_t, 1>{cur};
    }).value[0];
    if (insdel::insert(ctx, next_of(t), node, *this).ok) {
      // insert flushed the link, so the tail may move past it; never
      // from a recovery execution.
      if (!ctx.recovery) {
        Offset expected = t;
        vtail_.compare_exchange_strong(expected, node);
      }
      return;
    }
  }
}

std::uint64_t VolQueue::remove(ThreadCtx& ctx, Offset mmt) {
  for (;;) {
    auto snap = Checkpoint<3>(mmt + vq::kSnap).run_with(ctx, [&] {
      std::uint64_t h = insdel::load(ctx, head());
      std::uint64_t t = vtail_.load();
      std::uint64_t nx = h != t ? ctx.pool().load_word(next_of(h)) & pmem::kOffsetMask
                                : insdel::load(ctx, next_of(h));
      return std::array<std::uint64_t, 3>{h, t, nx};
    });
    const auto [h, t, nx] = snap.value;
    if (h == t) {
      if (nx == 0) return Checkpoint<1>(mmt + vq::kResult).run(ctx, {kEmpty}).value[0];
      if (!ctx.recovery) {
        Offset expected = t;
        vtail_.compare_exchange_strong(expected, nx);
      }
      continue;
    }
    const insdel::Result r = insdel::remove(ctx, head(), h, nx);
    // After a reboot the tail restarts at the head, so a resumed or helped
    // delete can detach the node it points at. Keep it reachable.
    const Offset moved_to = r.ok ? nx : indelword::offset(r.current);
    if (moved_to != pmem::kNull && moved_to != h) {
      Offset expected = h;
      vtail_.compare_exchange_strong(expected, moved_to);
    }
    if (r.ok) return finish_remove(ctx, mmt + vq::kResult, nx);
  }
}

bool VolQueue::check_invariants(std::string* why) const {
  const pmem::PmemPool& pool = *env_->pool;
  Offset t = vtail_.load();
  Offset cur = pool.load_word(head()) & pmem::kOffsetMask;
  const std::uint64_t bound = pool.layout().heap_slots + 1;
  for (std::uint64_t steps = 0; steps <= bound; ++steps) {
    if (cur == t) return true;
    Offset link = next_of(cur);
    std::uint64_t w = pool.load_word(link);
    if ((w & pmem::kOffsetMask) == pmem::kNull) break;
    if ((pool.persisted_word(link) & pmem::kOffsetMask) != (w & pmem::kOffsetMask)) {
      if (why != nullptr) *why = "unpersisted link between head and tail at " + std::to_string(link);
      return false;
    }
    cur = w & pmem::kOffsetMask;
  }
  if (why != nullptr) *why = "tail not reachable from head";
  return false;
}

}  // namespace mmtk::ds
