#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mmtk/context.hpp"
#include "mmtk/harness/history.hpp"
#include "mmtk/pmem/pool.hpp"

namespace mmtk::harness {

enum class CrashKind { kNone, kFullSystem, kThread };
enum class Trigger { kRandom, kLabel, kOpCount };

// Parsed from `key=value` lines (or `;`-separated pairs); `#` starts a
// comment. Keys:
//   kind        none | full_system | thread
//   trigger     random | label | op_count
//   count       number of crash events
//   every       mean distance between random events (label hits or ops)
//   labels      comma-separated label names eligible for label/random triggers
//   occurrence  label trigger: fire at this hit of the eligible labels
//   at_ops      op_count trigger: comma-separated completed-op counts
//   tid         only count hits on this thread
//   model       revert_all_dirty | per_line_random
//   seed        crash randomness (defaults to the workload seed)
struct CrashPlan {
  CrashKind kind = CrashKind::kNone;
  Trigger trigger = Trigger::kRandom;
  std::uint32_t count = 0;
  std::uint64_t every = 0;
  std::vector<Label> labels;
  std::uint64_t occurrence = 0;
  std::vector<std::uint64_t> at_ops;
  int tid = -1;
  pmem::CrashModel::Mode model = pmem::CrashModel::Mode::kRevertAllDirty;
  std::uint64_t seed = 0;

  static CrashPlan parse(std::string_view text);
  std::string to_string() const;
};

// Fires the crashes of a plan. Full-system crashes triggered by operation
// counts go through on_op_complete; everything else through labeled points.
// Other tracers can be chained behind it.
class CrashInjector : public Tracer {
 public:
  CrashInjector(const CrashPlan& plan, std::uint64_t seed, std::uint64_t total_ops);

  void set_next(Tracer* next) { next_ = next; }
  void set_log(HistoryLog* log) { log_ = log; }
  void set_enabled(bool on) { enabled_.store(on); }

  // Returns true if the caller should stop: a full crash was requested.
  bool on_op_complete(pmem::PmemPool& pool);

  void on_point(ThreadCtx& ctx, Label l) override;
  void on_cas_installed(ThreadCtx& ctx, Offset loc, std::uint64_t w) override;
  void on_cas_committed(ThreadCtx& ctx, std::uint64_t m) override;
  void on_help(ThreadCtx& ctx, Offset loc, std::uint64_t w, Timestamp t) override;
  void on_repl_commit(ThreadCtx& ctx, Offset block, std::uint64_t repl) override;
  void on_retire(ThreadCtx& ctx, Offset block) override;
  void on_checkpoint(ThreadCtx& ctx, Offset mmt, Timestamp ts) override;

  std::uint64_t fired() const { return next_event_.load(); }
  const CrashPlan& plan() const { return plan_; }

 private:
  bool eligible(ThreadCtx& ctx, Label l) const;

  CrashPlan plan_;
  std::vector<std::uint64_t> thresholds_;
  std::atomic<std::uint64_t> counter_{0};
  std::atomic<std::uint64_t> next_event_{0};
  std::atomic<bool> enabled_{true};
  std::vector<bool> label_mask_;
  Tracer* next_ = nullptr;
  HistoryLog* log_ = nullptr;
};

}  // namespace mmtk::harness
