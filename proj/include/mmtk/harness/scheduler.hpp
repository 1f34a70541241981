#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <random>
#include <semaphore>
#include <vector>

#include "mmtk/pmem/pool.hpp"

namespace mmtk::harness {

// Runs participants on real threads but lets exactly one of them execute
// at a time. Installed as the pool's access hook, it hands the baton to a
// seeded random participant before every pool access, so a run is a pure
// function of its seed.
class ScriptedScheduler : public pmem::AccessHook {
 public:
  explicit ScriptedScheduler(std::uint64_t seed) : rng_(seed) {}

  // Before access number `step` (1-based) every participant stops with
  // SystemCrash and the pool is marked crashing. 0 disables.
  void set_crash_step(pmem::PmemPool* pool, std::uint64_t step) {
    pool_ = pool;
    crash_step_ = step;
  }
  // Called on the running participant before each scheduling decision,
  // while every other participant is parked.
  void set_step_hook(std::function<void()> hook) { step_hook_ = std::move(hook); }

  // Runs the bodies to completion. Returns true if the run ended in a
  // full-system crash. Rethrows the first unexpected exception.
  bool run(std::vector<std::function<void()>> bodies);

  void on_access() override;
  std::uint64_t steps() const { return step_; }

 private:
  struct Participant {
    std::binary_semaphore go{0};
    bool done = false;
  };

  void hand_off(std::size_t me, bool finished);
  std::size_t pick();

  std::mt19937_64 rng_;
  std::vector<std::unique_ptr<Participant>> parts_;
  std::binary_semaphore all_done_{0};
  std::size_t alive_ = 0;
  std::uint64_t step_ = 0;
  std::uint64_t crash_step_ = 0;
  bool crashing_ = false;
  bool in_hook_ = false;
  pmem::PmemPool* pool_ = nullptr;
  std::function<void()> step_hook_;
  std::exception_ptr error_;
};

}  // namespace mmtk::harness
