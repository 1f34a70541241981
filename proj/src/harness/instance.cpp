#include "mmtk/harness/instance.hpp"

#include <algorithm>
#include <array>

namespace mmtk::harness {

namespace {

namespace app {
constexpr Offset kMagic = 0, kKind = 8, kRoot = 16, kThreads = 24;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Offset new_body(pmem::PmemPool& pool, pmem::PmemAllocator& alloc, std::size_t bytes) {
  Offset body = alloc.allocate(std::max<std::size_t>(bytes, 8));
  const std::size_t span = alloc.block_slots(body) * pmem::kLineSize;
  for (Offset w = 0; w < span; w += 8) pool.store_word(body + w, 0);
  for (Offset l = 0; l < span; l += pmem::kLineSize) pool.flush(body + l);
  return body;
}

Offset write_app_root(pmem::PmemPool& pool, pmem::PmemAllocator& alloc, std::uint64_t kind, Offset root,
                      std::uint32_t threads) {
  Offset a = alloc.allocate();
  pool.store_word(a + app::kMagic, Instance::kAppMagic);
  pool.store_word(a + app::kKind, kind);
  pool.store_word(a + app::kRoot, root);
  pool.store_word(a + app::kThreads, threads);
  pool.flush(a);
  return a;
}

}  // namespace

std::string_view workload_name(Workload w) {
  switch (w) {
    case Workload::kPair:
      return "pair";
    case Workload::kEnq0:
      return "enq0";
    case Workload::kEnq20:
      return "enq20";
    case Workload::kEnq50:
      return "enq50";
    case Workload::kEnq80:
      return "enq80";
  }
  return "?";
}

bool parse_workload(std::string_view s, Workload& out) {
  for (Workload w : {Workload::kPair, Workload::kEnq0, Workload::kEnq20, Workload::kEnq50, Workload::kEnq80}) {
    if (workload_name(w) == s) {
      out = w;
      return true;
    }
  }
  return false;
}

OpKind op_kind(const WorkloadSpec& spec, std::uint32_t tid, std::uint64_t index) {
  std::uint64_t pct = 0;
  switch (spec.workload) {
    case Workload::kPair:
      return OpKind::kPair;
    case Workload::kEnq0:
      return OpKind::kRemove;
    case Workload::kEnq20:
      pct = 20;
      break;
    case Workload::kEnq50:
      pct = 50;
      break;
    case Workload::kEnq80:
      pct = 80;
      break;
  }
  std::uint64_t r = mix(spec.seed ^ mix((static_cast<std::uint64_t>(tid) << 48) ^ index));
  return r % 100 < pct ? OpKind::kInsert : OpKind::kRemove;
}

void Instance::format(pmem::PmemPool& pool, ds::DsKind kind, std::uint32_t threads, std::uint64_t prefill,
                      HistoryLog* log) {
  if (pool.root_offset() != 0) throw pmem::UsageError("pool already holds an application");
  if (threads == 0 || threads > pool.layout().max_threads) throw pmem::UsageError("bad thread count");
  Clock clock;
  GlobalArrays arrays(pool);
  pmem::PmemAllocator alloc(pool);
  Smr smr(pool, alloc, pool.layout().max_threads);
  Env env{&pool, &clock, &arrays, &alloc, &smr, nullptr, {}};
  auto c = ds::create_container(kind, env);
  for (std::uint32_t tid = 0; tid < threads; ++tid) {
    RootRecord(pool, tid, c->fields()).set_body(new_body(pool, alloc, c->memento_bytes()));
  }
  // Prefill through thread 0's memento; the clear keeps its index at 0.
  RootRecord rec(pool, 0, c->fields());
  ThreadCtx ctx(env, 0);
  for (std::uint64_t k = 0; k < prefill; ++k) {
    smr.pin(ctx);
    c->insert(ctx, rec.body(), prefill_value(k));
    smr.unpin(ctx, [&] { rec.clear(&ctx, 0); });
    if (log != nullptr) log->event(RecOp::kPrefill, -1, prefill_value(k));
  }
  smr.drain();
  pool.set_root_offset(write_app_root(pool, alloc, static_cast<std::uint64_t>(kind), c->root(), threads));
}

void Instance::format_raw(pmem::PmemPool& pool, MementoTable table, std::uint32_t threads) {
  if (pool.root_offset() != 0) throw pmem::UsageError("pool already holds an application");
  if (threads == 0 || threads > pool.layout().max_threads) throw pmem::UsageError("bad thread count");
  pmem::PmemAllocator alloc(pool);
  for (std::uint32_t tid = 0; tid < threads; ++tid) {
    RootRecord(pool, tid, table).set_body(new_body(pool, alloc, memento_table_bytes(table)));
  }
  pool.set_root_offset(write_app_root(pool, alloc, kRawKind, 0, threads));
}

Instance::Instance(pmem::PmemPool& pool, AppOptions opts)
    : pool_(&pool),
      log_(opts.log),
      clock_(opts.raw_clock_start),
      arrays_(pool),
      alloc_(pool),
      smr_(pool, alloc_, pool.layout().max_threads),
      env_{&pool, &clock_, &arrays_, &alloc_, &smr_, opts.tracer, opts.config} {
  Offset a = pool.root_offset();
  if (a == 0 || pool.load_word(a + app::kMagic) != kAppMagic) {
    throw pmem::CorruptPoolError("pool holds no application root");
  }
  kind_ = pool.load_word(a + app::kKind);
  threads_ = static_cast<std::uint32_t>(pool.load_word(a + app::kThreads));
  if (threads_ == 0 || threads_ > pool.layout().max_threads) throw pmem::CorruptPoolError("bad thread count");
  MementoTable table = opts.raw_table;
  if (kind_ != kRawKind) {
    if (kind_ > static_cast<std::uint64_t>(ds::DsKind::kStack)) throw pmem::CorruptPoolError("unknown container");
    table = ds::memento_fields(static_cast<ds::DsKind>(kind_));
  }
  records_.reserve(threads_);
  for (std::uint32_t tid = 0; tid < threads_; ++tid) {
    records_.emplace_back(pool, tid, table);
    records_.back().resume_clear();
  }
  Timestamp tmax = arrays_.max_help();
  for (const auto& r : records_) tmax = std::max(tmax, r.max_timestamp());
  boot_tmax_ = tmax;
  clock_.calibrate(tmax);
  for (std::uint32_t tid = 0; tid < threads_; ++tid) {
    auto words = records_[tid].cas_memento_words();
    arrays_.init_own(tid, words);
    arrays_.set_local(tid, 0);
  }
  if (kind_ != kRawKind) {
    ds_ = ds::attach_container(static_cast<ds::DsKind>(kind_), env_, pool.load_word(a + app::kRoot));
    ds_->on_boot();
  }
  alloc_.set_observer([this](pmem::PmemAllocator::Event e, Offset b) {
    if (log_ != nullptr) log_->event(e == pmem::PmemAllocator::Event::kAlloc ? RecOp::kAlloc : RecOp::kFree, -1, b);
  });
}

void Instance::root_op(ThreadCtx& ctx, std::uint64_t index, const std::function<void(Offset)>& fn) {
  RootRecord& rec = records_.at(ctx.tid());
  if (ctx.recovery) {
    smr_.revive(ctx);
  } else {
    smr_.pin(ctx);
  }
  if (rec.clearing()) {
    rec.resume_clear();
    smr_.unpin(ctx);
    ctx.recovery = false;
    return;
  }
  if (rec.op_index() != index) {
    smr_.unpin(ctx);
    ctx.recovery = false;
    return;
  }
  ctx.point(Label::kOpBegin);
  fn(rec.body());
  smr_.unpin(ctx, [&] { rec.clear(&ctx, index + 1); });
  ctx.recovery = false;
}

void Instance::log_op(ThreadCtx& ctx, RecKind kind, RecOp op, std::uint64_t index, std::uint64_t arg,
                      std::uint64_t result) {
  if (log_ == nullptr) return;
  Record r;
  r.tid = static_cast<std::int32_t>(ctx.tid());
  r.kind = kind;
  r.op = op;
  r.index = index;
  r.arg = arg;
  r.result = result;
  r.ts = clock_.peek();
  log_->append(r);
}

void Instance::insert_op(ThreadCtx& ctx, std::uint64_t index, std::uint64_t value) {
  const RecOp op = kind_ == static_cast<std::uint64_t>(ds::DsKind::kStack) ? RecOp::kPush : RecOp::kEnq;
  root_op(ctx, index, [&](Offset body) {
    log_op(ctx, RecKind::kInv, op, index, value, 0);
    ds_->insert(ctx, body, value);
    log_op(ctx, RecKind::kRes, op, index, value, 0);
  });
}

std::uint64_t Instance::remove_op(ThreadCtx& ctx, std::uint64_t index) {
  const RecOp op = kind_ == static_cast<std::uint64_t>(ds::DsKind::kStack) ? RecOp::kPop : RecOp::kDeq;
  std::uint64_t out = ds::kEmpty;
  root_op(ctx, index, [&](Offset body) {
    log_op(ctx, RecKind::kInv, op, index, 0, 0);
    out = ds_->remove(ctx, body);
    log_op(ctx, RecKind::kRes, op, index, 0, out);
  });
  return out;
}

void Instance::workload_op(ThreadCtx& ctx, const WorkloadSpec& spec, std::uint64_t index) {
  const OpKind k = op_kind(spec, ctx.tid(), index);
  const bool stack = kind_ == static_cast<std::uint64_t>(ds::DsKind::kStack);
  const RecOp ins = stack ? RecOp::kPush : RecOp::kEnq;
  const RecOp rem = stack ? RecOp::kPop : RecOp::kDeq;
  root_op(ctx, index, [&](Offset body) {
    if (k != OpKind::kRemove) {
      const std::uint64_t v = op_value(ctx.tid(), index);
      log_op(ctx, RecKind::kInv, ins, index, v, 0);
      ds_->insert(ctx, body, v);
      log_op(ctx, RecKind::kRes, ins, index, v, 0);
    }
    if (k != OpKind::kInsert) {
      log_op(ctx, RecKind::kInv, rem, index, 0, 0);
      const std::uint64_t r = ds_->remove(ctx, body);
      log_op(ctx, RecKind::kRes, rem, index, 0, r);
    }
  });
}

std::vector<std::string> Instance::uaf_sweep() const {
  std::vector<std::string> out;
  if (!ds_) return out;
  try {
    for (Offset b : ds_->reachable_blocks()) {
      if (!alloc_.is_allocated(b)) out.push_back("reachable block " + std::to_string(b) + " is free");
    }
    for (const auto& r : records_) {
      if (r.body() == 0) continue;
      for (Offset h : ds_->checkpointed_handles(r.body())) {
        if (!alloc_.is_allocated(h)) out.push_back("memento handle " + std::to_string(h) + " is free");
      }
    }
  } catch (const std::exception& e) {
    out.push_back(std::string("traversal failed: ") + e.what());
  }
  return out;
}

}  // namespace mmtk::harness
