#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmtk/harness/crash_plan.hpp"
#include "mmtk/harness/history.hpp"
#include "mmtk/harness/instance.hpp"

namespace mmtk::harness {

enum class Mode { kStress, kScripted };

struct RunConfig {
  WorkloadSpec spec;
  CrashPlan plan;
  Mode mode = Mode::kStress;
  Config algo;
  std::uint64_t capacity = 1ull << 22;
  // File-backed pool; anonymous when unset.
  std::optional<std::filesystem::path> pool_path;
  // Side file receiving the history as it is written.
  std::optional<std::filesystem::path> log_path;
  // Scripted mode: full-crash steps are drawn from [1, crash_step_range].
  std::uint64_t crash_step_range = 0;
  // Extra tracer chained behind the crash injector.
  Tracer* tracer = nullptr;
  // Run the UAF sweep after every boot's recovery phase.
  bool sweep_each_boot = true;
  // Scripted mode: check the msq-vol tail invariants before every step.
  bool check_each_step = false;
  std::uint32_t max_boots = 10000;
};

struct RunResult {
  HistoryLog log;
  std::vector<std::uint64_t> final_contents;
  std::uint32_t boots = 0;
  std::uint64_t full_crashes = 0;
  std::uint64_t thread_crashes = 0;
  std::uint64_t flushes = 0;
  std::uint64_t fences = 0;
  std::uint64_t helps = 0;
  std::uint64_t steps = 0;  // scripted mode
  double seconds = 0;
  double work_seconds = 0;  // worker phases only
  std::vector<std::string> errors;

  bool ok() const { return errors.empty(); }
};

// Formats a fresh pool, runs the workload to completion across every crash
// of the plan, and checks exactly-once, double frees and reachable-block
// safety. Errors (including detector failures) land in RunResult::errors.
RunResult run(const RunConfig& cfg);

}  // namespace mmtk::harness
