#include "mmtk/ds/stack.hpp"

#include "mmtk/checkpoint.hpp"
#include "mmtk/dcas.hpp"
#include "mmtk/smr.hpp"

namespace mmtk::ds {

namespace {
constexpr Offset kNode = 0, kPushCas = 32, kPopCas = 40, kTop = 64, kResult = 96, kSnap = 128;
}  // namespace

void CasStack::insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) {
  pmem::PmemPool& pool = ctx.pool();
  const Offset node = Checkpoint<1>(mmt + kNode).run_with(ctx, [&] {
    return std::array<std::uint64_t, 1>{new_node(ctx, value)};
  }).value[0];
  for (;;) {
    const std::uint64_t t = Checkpoint<1>(mmt + kTop).run_with(ctx, [&] {
      return std::array<std::uint64_t, 1>{dcas::load(ctx, top())};
    }).value[0];
    // Rewriting next on a re-execution stores the same checkpointed value.
    pool.store_word(node + node::kNext, t);
    pool.flush(node + node::kNext);
    if (dcas::cas(ctx, top(), t, node, mmt + kPushCas).ok) return;
  }
}

std::uint64_t CasStack::remove(ThreadCtx& ctx, Offset mmt) {
  pmem::PmemPool& pool = ctx.pool();
  for (;;) {
    auto snap = Checkpoint<2>(mmt + kSnap).run_with(ctx, [&] {
      std::uint64_t t = dcas::load(ctx, top());
      std::uint64_t nx = t == 0 ? 0 : pool.load_word((t & pmem::kOffsetMask) + node::kNext);
      return std::array<std::uint64_t, 2>{t, nx};
    });
    const auto [t, nx] = snap.value;
    if (t == 0) return Checkpoint<1>(mmt + kResult).run(ctx, {kEmpty}).value[0];
    if (dcas::cas(ctx, top(), t, nx, mmt + kPopCas).ok) {
      std::uint64_t v = pool.load_word(t + node::kValue);
      env_->smr->retire(ctx, t);
      return Checkpoint<1>(mmt + kResult).run(ctx, {v}).value[0];
    }
  }
}

std::vector<std::uint64_t> CasStack::traverse() const {
  std::vector<std::uint64_t> out;
  for (Offset b : reachable_blocks()) out.push_back(env_->pool->load_word(b + node::kValue));
  return out;
}

std::vector<Offset> CasStack::reachable_blocks() const {
  return chain(env_->pool->load_word(top()) & pmem::kOffsetMask);
}

}  // namespace mmtk::ds
