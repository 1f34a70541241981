#include "mmtk/harness/enumerate.hpp"

#include <optional>
#include <utility>

namespace mmtk::harness {

namespace {

class AccessCounter : public pmem::AccessHook {
 public:
  AccessCounter(pmem::PmemPool& pool, std::uint64_t crash_after) : pool_(pool), crash_after_(crash_after) {}
  void on_access() override {
    if (crash_after_ != kNever && count_ == crash_after_) pool_.request_crash();
    ++count_;
  }
  std::uint64_t count() const { return count_; }
  static constexpr std::uint64_t kNever = ~0ull;

 private:
  pmem::PmemPool& pool_;
  std::uint64_t crash_after_;
  std::uint64_t count_ = 0;
};

class LabelRecorder : public Tracer {
 public:
  explicit LabelRecorder(const AccessCounter& c) : counter_(c) {}
  void on_point(ThreadCtx&, Label l) override { hits.emplace_back(l, counter_.count()); }
  std::vector<std::pair<Label, std::uint64_t>> hits;

 private:
  const AccessCounter& counter_;
};

HistoryLog copy_log(const HistoryLog& log) { return HistoryLog::from_text(log.text()); }

}  // namespace

EnumReport enumerate_crash_window(const EnumScenario& sc, Label from, Label to, std::uint64_t from_hit) {
  EnumReport rep;

  // Trace run: where (in pool accesses) do the two labels fall?
  std::uint64_t a_from = 0, a_to = 0, a_total = 0;
  {
    auto pool = sc.make_pool();
    AccessCounter counter(*pool, AccessCounter::kNever);
    LabelRecorder rec(counter);
    AppOptions opts = sc.options;
    opts.tracer = &rec;
    HistoryLog log;
    opts.log = &log;
    Instance inst(*pool, opts);
    pool->set_hook(&counter);
    sc.script(inst, log);
    pool->set_hook(nullptr);
    a_total = counter.count();
    std::uint64_t seen = 0;
    std::size_t i = 0;
    for (; i < rec.hits.size(); ++i) {
      if (rec.hits[i].first == from && ++seen == from_hit) break;
    }
    if (i < rec.hits.size()) {
      a_from = rec.hits[i].second;
      if (from == to) {
        a_to = a_from;
        rep.window_found = true;
      }
      for (std::size_t j = i + 1; j < rec.hits.size() && !rep.window_found; ++j) {
        if (rec.hits[j].first == to) {
          a_to = rec.hits[j].second;
          rep.window_found = true;
        }
      }
    }
    if (!rep.window_found) {
      rep.failures.push_back(std::string("window ") + std::string(label_name(from)) + " .. " +
                             std::string(label_name(to)) + " not reached");
      return rep;
    }
  }
  rep.window_accesses = a_to - a_from;

  for (std::uint64_t point = a_from; point <= a_to; ++point) {
    ++rep.crash_points;
    auto pool = sc.make_pool();
    AccessCounter counter(*pool, point);
    HistoryLog log;
    AppOptions opts = sc.options;
    opts.log = &log;
    {
      Instance inst(*pool, opts);
      pool->set_hook(&counter);
      try {
        sc.script(inst, log);
        // A window ending at the last access: crash right after the script.
        if (point == a_total) pool->request_crash();
      } catch (const pmem::SystemCrash&) {
      }
      pool->set_hook(nullptr);
      pool->discard_pending();
    }
    const std::string where = "crash after access " + std::to_string(point);
    if (!pool->crashing()) {
      rep.failures.push_back(where + ": script finished without reaching the crash point");
      continue;
    }
    std::optional<pmem::CrashImageSet> images;
    try {
      images.emplace(pool->crash(pmem::CrashModel::enumerate()));
    } catch (const pmem::ExplosionError& e) {
      rep.failures.push_back(where + ": " + e.what());
      continue;
    }
    for (std::size_t i = 0; i < images->size(); ++i) {
      ++rep.images;
      const std::string at = where + " image " + std::to_string(i) + ": ";
      const std::size_t before = rep.failures.size();
      try {
        auto crashed = pmem::PmemPool::from_image(images->image(i));
        HistoryLog rlog = copy_log(log);
        rlog.set_boot(1);
        AppOptions ropts = sc.options;
        ropts.log = &rlog;
        Instance rinst(*crashed, ropts);
        if (sc.uaf_sweep) {
          auto bad = rinst.uaf_sweep();
          for (const auto& e : bad) rep.failures.push_back(at + "before recovery: " + e);
        }
        // Recovering over freed memory can loop forever.
        if (rep.failures.size() == before) {
          sc.recover(rinst, rlog);
          if (sc.uaf_sweep) {
            for (const auto& e : rinst.uaf_sweep()) rep.failures.push_back(at + "after recovery: " + e);
          }
          if (sc.check) {
            std::string verdict = sc.check(rinst, rlog);
            if (!verdict.empty()) rep.failures.push_back(at + verdict);
          }
        }
      } catch (const std::exception& e) {
        rep.failures.push_back(at + "exception: " + e.what());
      }
      if (sc.on_failure && rep.failures.size() > before) sc.on_failure(images->image(i), rep.failures[before]);
    }
  }
  return rep;
}

}  // namespace mmtk::harness
