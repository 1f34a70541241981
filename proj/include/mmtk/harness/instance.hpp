#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mmtk/clock.hpp"
#include "mmtk/context.hpp"
#include "mmtk/ds/container.hpp"
#include "mmtk/harness/history.hpp"
#include "mmtk/pmem/allocator.hpp"
#include "mmtk/pmem/pool.hpp"
#include "mmtk/smr.hpp"

namespace mmtk::harness {

// enqNN: each root op inserts with probability NN%, else removes.
enum class Workload { kPair, kEnq0, kEnq20, kEnq50, kEnq80 };
std::string_view workload_name(Workload w);
bool parse_workload(std::string_view s, Workload& out);

struct WorkloadSpec {
  ds::DsKind ds = ds::DsKind::kMsqCas;
  Workload workload = Workload::kPair;
  std::uint32_t threads = 4;
  std::uint64_t ops = 1000;  // root operations per thread
  std::uint64_t prefill = 0;
  std::uint64_t seed = 1;
};

enum class OpKind { kInsert, kRemove, kPair };
OpKind op_kind(const WorkloadSpec& spec, std::uint32_t tid, std::uint64_t index);
// Unique per (thread, index); never collides with prefill values.
inline std::uint64_t op_value(std::uint32_t tid, std::uint64_t index) {
  return (static_cast<std::uint64_t>(tid + 1) << 40) | (index + 1);
}
inline std::uint64_t prefill_value(std::uint64_t k) { return (1ull << 62) | k; }

struct AppOptions {
  Config config;
  Tracer* tracer = nullptr;
  HistoryLog* log = nullptr;
  std::uint64_t raw_clock_start = 0;
  // Memento table for applications without a container.
  MementoTable raw_table = {};
};

// One boot of an application stored in a pool. The application root block
// (pointed to by the pool root offset) records the container kind, its root
// and the number of threads; each thread owns a root record in the clearing
// region whose body is the composite memento of its current root operation.
class Instance {
 public:
  static constexpr std::uint64_t kAppMagic = 0x3150504b544d4d;  // "MMTKPP1"
  static constexpr std::uint64_t kRawKind = 0xff;

  // Formats the application. The pool must be freshly created.
  static void format(pmem::PmemPool& pool, ds::DsKind kind, std::uint32_t threads, std::uint64_t prefill = 0,
                     HistoryLog* log = nullptr);
  static void format_raw(pmem::PmemPool& pool, MementoTable table, std::uint32_t threads);

  // Boot: finish interrupted clears, calibrate the clock past every
  // persisted timestamp, seed OWN, rebuild volatile state.
  Instance(pmem::PmemPool& pool, AppOptions opts = {});
  Instance(const Instance&) = delete;
  Instance& operator=(const Instance&) = delete;

  pmem::PmemPool& pool() const { return *pool_; }
  Env& env() { return env_; }
  Clock& clock() { return clock_; }
  GlobalArrays& arrays() { return arrays_; }
  pmem::PmemAllocator& alloc() { return alloc_; }
  const pmem::PmemAllocator& alloc() const { return alloc_; }
  Smr& smr() { return smr_; }
  ds::Container* container() const { return ds_.get(); }
  std::uint32_t threads() const { return threads_; }
  RootRecord& record(std::uint32_t tid) { return records_.at(tid); }
  const RootRecord& record(std::uint32_t tid) const { return records_.at(tid); }
  Timestamp boot_max_timestamp() const { return boot_tmax_; }
  void set_tracer(Tracer* t) { env_.tracer = t; }
  void set_log(HistoryLog* log) { log_ = log; }
  HistoryLog* log() const { return log_; }

  // Runs root operation `index` of ctx's thread inside an SMR section and
  // clears its memento afterwards. A root operation already past `index`
  // (or one whose clear was interrupted) is only finished off.
  void root_op(ThreadCtx& ctx, std::uint64_t index, const std::function<void(Offset body)>& fn);
  void workload_op(ThreadCtx& ctx, const WorkloadSpec& spec, std::uint64_t index);
  void insert_op(ThreadCtx& ctx, std::uint64_t index, std::uint64_t value);
  std::uint64_t remove_op(ThreadCtx& ctx, std::uint64_t index);

  // Quiesced: blocks reachable from the container or held by a memento
  // that the allocator considers free.
  std::vector<std::string> uaf_sweep() const;

 private:
  void log_op(ThreadCtx& ctx, RecKind kind, RecOp op, std::uint64_t index, std::uint64_t arg,
              std::uint64_t result);

  pmem::PmemPool* pool_;
  HistoryLog* log_;
  std::uint32_t threads_ = 0;
  std::uint64_t kind_ = kRawKind;
  Clock clock_;
  GlobalArrays arrays_;
  pmem::PmemAllocator alloc_;
  Smr smr_;
  Env env_;
  std::unique_ptr<ds::Container> ds_;
  std::vector<RootRecord> records_;
  Timestamp boot_tmax_ = 0;
};

}  // namespace mmtk::harness
