#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mmtk/context.hpp"
#include "mmtk/harness/history.hpp"
#include "mmtk/harness/instance.hpp"
#include "mmtk/pmem/pool.hpp"

namespace mmtk::harness {

// A deterministic, single-OS-thread scenario: `script` runs on a freshly
// booted instance and is crashed part-way; `recover` runs on every crash
// image after reboot; `check` judges the recovered state.
struct EnumScenario {
  std::function<std::unique_ptr<pmem::PmemPool>()> make_pool;
  AppOptions options;
  std::function<void(Instance&, HistoryLog&)> script;
  std::function<void(Instance&, HistoryLog&)> recover;
  // Empty string means the postcondition holds.
  std::function<std::string(Instance&, const HistoryLog&)> check;
  // Also reject crash images in which a reachable block or a checkpointed
  // handle is free (before and after recovery).
  bool uaf_sweep = true;
  // Called once per rejected crash image.
  std::function<void(const pmem::Image&, const std::string& why)> on_failure;
};

struct EnumReport {
  std::uint64_t crash_points = 0;
  std::uint64_t images = 0;
  std::uint64_t window_accesses = 0;
  std::vector<std::string> failures;
  bool window_found = false;

  bool ok() const { return window_found && failures.empty(); }
};

// Crashes the scenario before every pool access between the `from_hit`-th
// hit of label `from` and the next hit of `to` (inclusive; a window ending at
// the last access also crashes just after the script), and checks every
// subset of the dirty lines at each point.
EnumReport enumerate_crash_window(const EnumScenario& sc, Label from, Label to, std::uint64_t from_hit = 1);

}  // namespace mmtk::harness
