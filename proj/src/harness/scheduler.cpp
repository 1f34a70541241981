#include "mmtk/harness/scheduler.hpp"

#include <thread>

namespace mmtk::harness {

namespace {
thread_local ScriptedScheduler* t_sched = nullptr;
thread_local std::size_t t_index = 0;
}  // namespace

std::size_t ScriptedScheduler::pick() {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (!parts_[i]->done) live.push_back(i);
  }
  return live[rng_() % live.size()];
}

void ScriptedScheduler::hand_off(std::size_t me, bool finished) {
  if (finished) {
    parts_[me]->done = true;
    if (--alive_ == 0) {
      all_done_.release();
      return;
    }
  }
  std::size_t next = pick();
  if (!finished && next == me) return;
  parts_[next]->go.release();
  if (!finished) parts_[me]->go.acquire();
}

void ScriptedScheduler::on_access() {
  if (t_sched != this || in_hook_) return;
  ++step_;
  if (step_hook_) {
    in_hook_ = true;
    step_hook_();
    in_hook_ = false;
  }
  if (crash_step_ != 0 && step_ >= crash_step_ && !crashing_) {
    crashing_ = true;
    if (pool_ != nullptr) pool_->request_crash();
  }
  if (crashing_) throw pmem::SystemCrash{};
  hand_off(t_index, false);
  if (crashing_) throw pmem::SystemCrash{};
}

bool ScriptedScheduler::run(std::vector<std::function<void()>> bodies) {
  parts_.clear();
  for (std::size_t i = 0; i < bodies.size(); ++i) parts_.push_back(std::make_unique<Participant>());
  alive_ = bodies.size();
  crashing_ = false;
  error_ = nullptr;
  if (bodies.empty()) return false;
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([this, i, &bodies] {
      t_sched = this;
      t_index = i;
      parts_[i]->go.acquire();
      try {
        bodies[i]();
      } catch (const pmem::SystemCrash&) {
      } catch (...) {
        if (!error_) error_ = std::current_exception();
        crashing_ = true;
        if (pool_ != nullptr) pool_->request_crash();
      }
      t_sched = nullptr;
      hand_off(i, true);
    });
  }
  parts_[pick()]->go.release();
  all_done_.acquire();
  for (auto& t : threads) t.join();
  if (error_) std::rethrow_exception(error_);
  return crashing_;
}

}  // namespace mmtk::harness
