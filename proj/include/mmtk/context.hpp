#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string_view>

#include "mmtk/clock.hpp"
#include "mmtk/pmem/allocator.hpp"
#include "mmtk/pmem/pool.hpp"

namespace mmtk {

class Smr;
struct CriticalSection;
class ThreadCtx;

// Named points inside the algorithms. They drive coverage counters, crash
// injection and the scripted scheduler.
enum class Label : std::uint16_t {
  kCkptAfterBuf,
  kCkptAfterTs,
  kCkptDetected,

  kCasAfterFirstCas,
  kCasAfterFlushLoc,
  kCasAfterMementoStore,
  kCasAfterSecondCas,
  kCasAfterFail,
  kCasRecStale,     // memento older than LOCAL: re-examine location
  kCasRecFail,      // failure already checkpointed
  kCasRecNotLast,   // succeeded, not the thread's last CAS
  kCasRecResume36,  // last CAS, redo second plain CAS
  kCasRecResume33,  // location still annotated
  kCasRecResume34,  // helped, HELP raised
  kCasRecNormal,    // nothing persisted
  kCasHelpRaised,
  kCasHelpApplied,

  kLoadFlushed,
  kInsAfterCas,
  kInsAfterFlush,
  kInsRecContained,
  kInsRecSpurious,
  kDelAfterReplCas,
  kDelAfterLocCas,
  kDelRecResume,  // repl carries our id
  kDelRecErr,     // nothing persisted
  kDelHelpApplied,

  kUnpinBegin,
  kUnpinAfterFlush,
  kUnpinEnd,
  kClearAfterFlag,
  kClearAfterSubs,
  kClearDone,

  kOpBegin,
  kCount
};

std::string_view label_name(Label l);
bool parse_label(std::string_view name, Label& out);

// Process-wide hit counters.
namespace coverage {
void hit(Label l);
std::uint64_t count(Label l);
void reset();
}  // namespace coverage

// Cooperative thread kill, thrown from a labeled point.
struct ThreadCrash {};

class Tracer {
 public:
  virtual ~Tracer() = default;
  virtual void on_point(ThreadCtx&, Label) {}
  // First plain CAS installed `annotated` at loc.
  virtual void on_cas_installed(ThreadCtx&, Offset /*loc*/, std::uint64_t /*annotated*/) {}
  // Successful CAS memento word chosen (normal path or case-3 resume).
  virtual void on_cas_committed(ThreadCtx&, std::uint64_t /*memento*/) {}
  // HELP[parity][owner] raised to t_cur after observing `annotated`.
  virtual void on_help(ThreadCtx&, Offset /*loc*/, std::uint64_t /*annotated*/, Timestamp /*t_cur*/) {}
  virtual void on_repl_commit(ThreadCtx&, Offset /*block*/, std::uint64_t /*repl*/) {}
  virtual void on_retire(ThreadCtx&, Offset /*block*/) {}
  virtual void on_checkpoint(ThreadCtx&, Offset /*mmt*/, Timestamp /*ts*/) {}
};

struct Config {
  std::uint64_t patience = 100;
  // Test-only: omit the deferred flush of the location on the delete path.
  bool skip_delete_flush = false;
};

struct Env {
  pmem::PmemPool* pool = nullptr;
  Clock* clock = nullptr;
  GlobalArrays* arrays = nullptr;
  pmem::PmemAllocator* alloc = nullptr;
  Smr* smr = nullptr;
  Tracer* tracer = nullptr;
  Config config;
};

class ThreadCtx {
 public:
  ThreadCtx(Env& env, std::uint32_t tid, bool recovery = false) : recovery(recovery), env_(&env), tid_(tid) {}

  Env& env() const { return *env_; }
  pmem::PmemPool& pool() const { return *env_->pool; }
  Clock& clock() const { return *env_->clock; }
  GlobalArrays& arrays() const { return *env_->arrays; }
  std::uint32_t tid() const { return tid_; }
  Tracer* tracer() const { return env_->tracer; }

  void point(Label l) {
    coverage::hit(l);
    if (env_->tracer != nullptr) env_->tracer->on_point(*this, l);
  }

  // Set by the monitor for a re-executed root operation; cleared by the
  // first primitive that finds it is past the pre-crash frontier.
  bool recovery;
  CriticalSection* cs = nullptr;
  std::uint64_t helps = 0;

 private:
  Env* env_;
  std::uint32_t tid_;
};

}  // namespace mmtk
