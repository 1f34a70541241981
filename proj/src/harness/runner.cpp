#include "mmtk/harness/runner.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <random>
#include <thread>

#include "mmtk/ds/queue.hpp"
#include "mmtk/harness/scheduler.hpp"
#include "mmtk/harness/verify.hpp"

namespace mmtk::harness {

namespace {

struct Shared {
  Instance* inst = nullptr;
  const WorkloadSpec* spec = nullptr;
  CrashInjector* inj = nullptr;
  HistoryLog* log = nullptr;
  std::atomic<std::uint64_t> thread_crashes{0};
  std::atomic<std::uint64_t> helps{0};
  std::atomic<bool> abort{false};
  std::mutex err_mu;
  std::vector<std::string> errors;

  void fail(const std::string& what) {
    std::lock_guard<std::mutex> g(err_mu);
    errors.push_back(what);
  }
};

// Runs root operations for one thread until its quota is done, the pool
// crashes, or (one_op) a single operation completed.
void drive(Shared& sh, std::uint32_t tid, bool recovery, bool one_op) {
  Instance& inst = *sh.inst;
  ThreadCtx ctx(inst.env(), tid, recovery);
  try {
    for (;;) {
      const std::uint64_t idx = inst.record(tid).op_index();
      if (idx >= sh.spec->ops) break;
      try {
        inst.workload_op(ctx, *sh.spec, idx);
      } catch (const ThreadCrash&) {
        sh.thread_crashes.fetch_add(1);
        sh.log->event(RecOp::kThreadCrash, static_cast<std::int32_t>(tid), idx);
        inst.pool().discard_pending();
        inst.arrays().set_local(tid, 0);
        sh.helps.fetch_add(ctx.helps);
        ctx = ThreadCtx(inst.env(), tid, true);
        sh.log->event(RecOp::kRevive, static_cast<std::int32_t>(tid), idx);
        continue;
      }
      if (sh.inj->on_op_complete(inst.pool())) break;
      if (one_op) break;
    }
  } catch (const pmem::SystemCrash&) {
  } catch (const std::exception& e) {
    sh.fail("thread " + std::to_string(tid) + ": " + e.what());
    sh.abort.store(true);
    inst.pool().request_crash();
  }
  sh.helps.fetch_add(ctx.helps);
}

void recover_all(Shared& sh) {
  for (std::uint32_t tid = 0; tid < sh.inst->threads(); ++tid) {
    if (sh.inst->pool().crashing()) return;
    drive(sh, tid, true, true);
  }
}

std::unique_ptr<pmem::PmemPool> fresh_pool(const RunConfig& cfg) {
  if (cfg.pool_path) {
    std::filesystem::remove(*cfg.pool_path);
    return pmem::PmemPool::open(*cfg.pool_path, cfg.capacity, cfg.spec.threads);
  }
  return pmem::PmemPool::create_anonymous(cfg.capacity, cfg.spec.threads);
}

std::unique_ptr<pmem::PmemPool> reopen(const RunConfig& cfg, const pmem::Image& img) {
  if (cfg.pool_path) {
    pmem::PmemPool::write_image(*cfg.pool_path, img);
    return pmem::PmemPool::open(*cfg.pool_path, cfg.capacity, cfg.spec.threads);
  }
  return pmem::PmemPool::from_image(img);
}

std::string vol_invariants(const Instance& inst) {
  auto* vq = dynamic_cast<ds::VolQueue*>(inst.container());
  std::string why;
  if (vq != nullptr && !vq->check_invariants(&why)) return why;
  return {};
}

void add_errors(std::vector<std::string>& out, const std::string& prefix, const std::vector<std::string>& errs) {
  for (const auto& e : errs) out.push_back(prefix + e);
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  if (cfg.log_path) res.log = HistoryLog(*cfg.log_path);
  const WorkloadSpec& spec = cfg.spec;
  const bool scripted = cfg.mode == Mode::kScripted;

  auto pool = fresh_pool(cfg);
  Instance::format(*pool, spec.ds, spec.threads, spec.prefill, &res.log);
  pool->persist_all();
  pool->reset_stats();

  CrashPlan inj_plan = cfg.plan;
  std::uint32_t scripted_crashes = 0;
  if (scripted && cfg.plan.kind == CrashKind::kFullSystem) {
    scripted_crashes = cfg.plan.count;
    inj_plan.kind = CrashKind::kNone;
  }
  CrashInjector inj(inj_plan, spec.seed, static_cast<std::uint64_t>(spec.threads) * spec.ops);
  inj.set_next(cfg.tracer);
  inj.set_log(&res.log);
  std::mt19937_64 rng((cfg.plan.seed != 0 ? cfg.plan.seed : spec.seed) * 0x9e3779b97f4a7c15ull + 1);
  const std::uint64_t step_range = cfg.crash_step_range != 0 ? cfg.crash_step_range : 2000;

  std::unique_ptr<Instance> inst;
  for (std::uint32_t boot = 0;; ++boot) {
    res.log.set_boot(boot);
    res.log.event(RecOp::kBoot, -1, boot);
    inst = std::make_unique<Instance>(*pool, AppOptions{cfg.algo, &inj, &res.log, 0, {}});
    Shared sh;
    sh.inst = inst.get();
    sh.spec = &spec;
    sh.inj = &inj;
    sh.log = &res.log;
    const std::string where = "boot " + std::to_string(boot) + ": ";
    if (cfg.sweep_each_boot) {
      auto bad = inst->uaf_sweep();
      if (!bad.empty()) {
        // Recovering from a pool whose structure already references freed
        // memory can loop forever; stop at the first detection.
        add_errors(res.errors, where + "before recovery: ", bad);
        res.boots = boot + 1;
        break;
      }
    }

    if (scripted) {
      ScriptedScheduler sched(rng());
      sched.set_crash_step(pool.get(), scripted_crashes > 0 ? 1 + rng() % step_range : 0);
      pool->set_hook(&sched);
      sched.run({[&] { recover_all(sh); }});
      if (!pool->crashing()) {
        if (cfg.sweep_each_boot) add_errors(res.errors, where + "after recovery: ", inst->uaf_sweep());
        if (auto why = vol_invariants(*inst); !why.empty()) res.errors.push_back(where + "after recovery: " + why);
        if (cfg.check_each_step && inst->container()->kind() == ds::DsKind::kMsqVol) {
          sched.set_step_hook([&] {
            if (auto why = vol_invariants(*inst); !why.empty()) {
              sh.fail("step " + std::to_string(sched.steps()) + ": " + why);
              sh.abort.store(true);
              pool->request_crash();
            }
          });
        }
        std::vector<std::function<void()>> bodies;
        for (std::uint32_t tid = 0; tid < spec.threads; ++tid) {
          bodies.emplace_back([&sh, tid] { drive(sh, tid, false, false); });
        }
        const auto w0 = std::chrono::steady_clock::now();
        sched.run(std::move(bodies));
        res.work_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
      }
      pool->set_hook(nullptr);
      res.steps += sched.steps();
      if (pool->crashing() && scripted_crashes > 0) --scripted_crashes;
    } else {
      recover_all(sh);
      if (!pool->crashing()) {
        if (cfg.sweep_each_boot) add_errors(res.errors, where + "after recovery: ", inst->uaf_sweep());
        if (auto why = vol_invariants(*inst); !why.empty()) res.errors.push_back(where + "after recovery: " + why);
        const auto w0 = std::chrono::steady_clock::now();
        std::vector<std::thread> workers;
        for (std::uint32_t tid = 0; tid < spec.threads; ++tid) {
          workers.emplace_back([&sh, tid] { drive(sh, tid, false, false); });
        }
        for (auto& w : workers) w.join();
        res.work_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();
      }
    }

    const auto st = pool->stats();
    res.flushes += st.flushes;
    res.fences += st.fences;
    res.thread_crashes += sh.thread_crashes.load();
    res.helps += sh.helps.load();
    add_errors(res.errors, where, sh.errors);
    if (sh.abort.load()) {
      res.boots = boot + 1;
      break;
    }

    if (pool->crashing()) {
      ++res.full_crashes;
      res.log.event(RecOp::kCrash, -1, boot);
      const pmem::CrashModel model = cfg.plan.model == pmem::CrashModel::Mode::kPerLineRandom
                                         ? pmem::CrashModel::per_line_random(rng())
                                         : pmem::CrashModel::revert_all_dirty();
      pmem::Image img = pool->crash(model).image(0);
      inst.reset();
      pool.reset();
      pool = reopen(cfg, img);
      if (boot + 1 >= cfg.max_boots) {
        res.errors.push_back("too many boots");
        res.boots = boot + 1;
        break;
      }
      continue;
    }

    res.boots = boot + 1;
    try {
      res.final_contents = inst->container()->traverse();
    } catch (const std::exception& e) {
      res.errors.push_back(std::string("final traversal: ") + e.what());
    }
    add_errors(res.errors, "final: ", inst->uaf_sweep());
    if (auto why = vol_invariants(*inst); !why.empty()) res.errors.push_back("final: " + why);
    break;
  }

  const auto records = res.log.records();
  if (res.errors.empty()) add_errors(res.errors, "", verify_exactly_once(records, res.final_contents));
  add_errors(res.errors, "", verify_no_double_free(records));
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace mmtk::harness
