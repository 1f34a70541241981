#include "mmtk/ds/container.hpp"

#include <algorithm>
#include <array>

#include "mmtk/ds/queue.hpp"
#include "mmtk/ds/stack.hpp"

namespace mmtk::ds {

namespace {

using K = MementoField::Kind;

// Sub-memento layouts. Each checkpoint pair sits inside one cacheline.
constexpr std::array<MementoField, 9> kCasQueueFields = {{
    {"enq.node", K::kCheckpoint, 0, 1, 0b1, "allocate node"},
    {"enq.link", K::kCas, 32, 0, 0, "link node after tail"},
    {"enq.swing", K::kCas, 40, 0, 0, "swing tail to own node"},
    {"enq.help_swing", K::kCas, 48, 0, 0, "swing lagging tail"},
    {"enq.tail_next", K::kCheckpoint, 64, 2, 0b11, "loop head: (tail, tail.next)"},
    {"deq.snap", K::kCheckpoint, 128, 3, 0b111, "loop head: (head, tail, head.next)"},
    {"deq.result", K::kCheckpoint, 192, 1, 0, "return value"},
    {"deq.head", K::kCas, 224, 0, 0, "advance head"},
    {"deq.swing", K::kCas, 232, 0, 0, "swing lagging tail"},
}};

constexpr std::array<MementoField, 7> kIndelQueueFields = {{
    {"enq.node", K::kCheckpoint, 0, 1, 0b1, "allocate node"},
    {"enq.swing", K::kCas, 32, 0, 0, "swing tail to own node"},
    {"enq.help_swing", K::kCas, 40, 0, 0, "swing lagging tail"},
    {"enq.tail_next", K::kCheckpoint, 64, 2, 0b11, "loop head: (tail, tail.next); insert inputs"},
    {"deq.snap", K::kCheckpoint, 128, 3, 0b111, "loop head: (head, tail, head.next); delete inputs"},
    {"deq.result", K::kCheckpoint, 192, 1, 0, "return value"},
    {"deq.swing", K::kCas, 224, 0, 0, "swing lagging tail"},
}};

constexpr std::array<MementoField, 4> kVolQueueFields = {{
    {"enq.node", K::kCheckpoint, 0, 1, 0b1, "allocate node"},
    {"enq.tail", K::kCheckpoint, 32, 1, 0b1, "loop head: last node; insert input"},
    {"deq.snap", K::kCheckpoint, 64, 3, 0b111, "loop head: (head, tail, head.next); delete inputs"},
    {"deq.result", K::kCheckpoint, 128, 1, 0, "return value"},
}};

constexpr std::array<MementoField, 6> kStackFields = {{
    {"push.node", K::kCheckpoint, 0, 1, 0b1, "allocate node"},
    {"push.cas", K::kCas, 32, 0, 0, "publish node as top"},
    {"pop.cas", K::kCas, 40, 0, 0, "unlink top"},
    {"push.top", K::kCheckpoint, 64, 1, 0b1, "loop head: observed top"},
    {"pop.result", K::kCheckpoint, 96, 1, 0, "return value"},
    {"pop.snap", K::kCheckpoint, 128, 2, 0b11, "loop head: (top, top.next)"},
}};

}  // namespace

MementoTable memento_fields(DsKind kind) {
  switch (kind) {
    case DsKind::kMsqCas:
      return kCasQueueFields;
    case DsKind::kMsqIndel:
      return kIndelQueueFields;
    case DsKind::kMsqVol:
      return kVolQueueFields;
    case DsKind::kStack:
      return kStackFields;
  }
  return {};
}

MementoTable CasQueue::fields() const { return kCasQueueFields; }
MementoTable IndelQueue::fields() const { return kIndelQueueFields; }
MementoTable VolQueue::fields() const { return kVolQueueFields; }
MementoTable CasStack::fields() const { return kStackFields; }

std::string_view ds_name(DsKind k) {
  switch (k) {
    case DsKind::kMsqCas:
      return "msq-cas";
    case DsKind::kMsqIndel:
      return "msq-indel";
    case DsKind::kMsqVol:
      return "msq-vol";
    case DsKind::kStack:
      return "stack";
  }
  return "?";
}

bool parse_ds(std::string_view s, DsKind& out) {
  for (DsKind k : {DsKind::kMsqCas, DsKind::kMsqIndel, DsKind::kMsqVol, DsKind::kStack}) {
    if (ds_name(k) == s) {
      out = k;
      return true;
    }
  }
  return false;
}

Offset Container::new_node(ThreadCtx& ctx, std::uint64_t value) const {
  pmem::PmemPool& pool = ctx.pool();
  Offset b = env_->alloc->allocate();
  pool.store_word(b + node::kValue, value);
  pool.store_word(b + node::kNext, 0);
  pool.store_word(b + node::kRepl, 0);
  pool.flush(b);
  return b;
}

std::vector<Offset> Container::chain(Offset first) const {
  const pmem::PmemPool& pool = *env_->pool;
  std::vector<Offset> out;
  const std::uint64_t bound = pool.layout().heap_slots + 1;
  for (Offset cur = first; cur != pmem::kNull; cur = pool.load_word(cur + node::kNext) & pmem::kOffsetMask) {
    if (out.size() > bound) throw CorruptionError("cycle detected while traversing");
    if (cur < pool.layout().heap_offset || cur >= pool.capacity()) {
      throw CorruptionError("link points outside the heap");
    }
    out.push_back(cur);
  }
  return out;
}

bool Container::contains(Offset block) const {
  auto blocks = reachable_blocks();
  return std::find(blocks.begin(), blocks.end(), block) != blocks.end();
}

std::vector<Offset> Container::checkpointed_handles(Offset mmt) const {
  const pmem::PmemPool& pool = *env_->pool;
  std::vector<Offset> out;
  for (const auto& f : fields()) {
    if (f.kind != MementoField::Kind::kCheckpoint || f.handle_mask == 0) continue;
    const Offset base = mmt + f.rel;
    const Offset slot_bytes = 8 * (f.words + 1);
    Timestamp t0 = pool.load_word(base);
    Timestamp t1 = pool.load_word(base + slot_bytes);
    if (t0 == 0 && t1 == 0) continue;
    Offset slot = t1 > t0 ? base + slot_bytes : base;
    for (std::size_t i = 0; i < f.words; ++i) {
      if (((f.handle_mask >> i) & 1) == 0) continue;
      Offset h = pool.load_word(slot + 8 * (i + 1)) & pmem::kOffsetMask;
      if (h != pmem::kNull) out.push_back(h);
    }
  }
  return out;
}

std::unique_ptr<Container> attach_container(DsKind kind, Env& env, Offset root) {
  switch (kind) {
    case DsKind::kMsqCas:
      return std::make_unique<CasQueue>(env, root);
    case DsKind::kMsqIndel:
      return std::make_unique<IndelQueue>(env, root);
    case DsKind::kMsqVol:
      return std::make_unique<VolQueue>(env, root);
    case DsKind::kStack:
      return std::make_unique<CasStack>(env, root);
  }
  return nullptr;
}

std::unique_ptr<Container> create_container(DsKind kind, Env& env) {
  pmem::PmemPool& pool = *env.pool;
  Offset root = env.alloc->allocate();
  for (Offset w = 0; w < pmem::kLineSize; w += 8) pool.store_word(root + w, 0);
  if (kind != DsKind::kStack) {
    Offset sentinel = env.alloc->allocate();
    pool.store_word(sentinel + node::kValue, kEmpty);
    pool.store_word(sentinel + node::kNext, 0);
    pool.store_word(sentinel + node::kRepl, 0);
    pool.flush(sentinel);
    pool.store_word(root + qroot::kHead, sentinel);
    pool.store_word(root + qroot::kTail, sentinel);
  }
  pool.flush(root);
  auto c = attach_container(kind, env, root);
  c->on_boot();
  return c;
}

}  // namespace mmtk::ds
