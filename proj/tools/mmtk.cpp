// mmtk: benchmarks and crash campaigns over the simulated PM pool.
//
//   mmtk bench     --ds msq-cas,msq-vol --workload pair --threads 1,2,4,8 --ops 10000
//   mmtk crashtest --ds msq-indel --crash-plan "kind=full_system; trigger=random; count=5; every=300"
//   mmtk crashtest --ds msq-indel --window smr.unpin.end:op.begin --bug-switch
//
// Exit codes: 0 all checks pass, 1 verification failure, 2 usage error.

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmtk/ds/container.hpp"
#include "mmtk/harness/enumerate.hpp"
#include "mmtk/harness/runner.hpp"
#include "mmtk/harness/verify.hpp"

using namespace mmtk;
using namespace mmtk::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<ds::DsKind> parse_ds_list(const std::string& s) {
  std::vector<ds::DsKind> out;
  for (const auto& name : split(s, ',')) {
    ds::DsKind k;
    if (!ds::parse_ds(name, k)) throw UsageError("unknown --ds value: " + name);
    out.push_back(k);
  }
  if (out.empty()) throw UsageError("--ds is empty");
  return out;
}

std::vector<Workload> parse_workload_list(const std::string& s) {
  std::vector<Workload> out;
  for (const auto& name : split(s, ',')) {
    Workload w;
    if (!parse_workload(name, w)) throw UsageError("unknown --workload value: " + name);
    out.push_back(w);
  }
  if (out.empty()) throw UsageError("--workload is empty");
  return out;
}

constexpr std::uint32_t kMaxThreads = 511;

std::vector<std::uint32_t> parse_thread_list(const std::string& s) {
  std::vector<std::uint32_t> out;
  for (const auto& item : split(s, ',')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v == 0 || v > kMaxThreads) {
      throw UsageError("--threads wants counts in 1.." + std::to_string(kMaxThreads) + ", got " + item);
    }
    out.push_back(static_cast<std::uint32_t>(v));
  }
  if (out.empty()) throw UsageError("--threads is empty");
  return out;
}

// A plan is either a file holding key=value lines or the text itself.
CrashPlan load_plan(const std::string& arg) {
  if (arg.empty()) return {};
  std::error_code ec;
  if (std::filesystem::is_regular_file(arg, ec)) {
    std::ifstream in(arg);
    std::stringstream ss;
    ss << in.rdbuf();
    return CrashPlan::parse(ss.str());
  }
  return CrashPlan::parse(arg);
}

// Room for the prefill, every insert and the per-thread bodies.
std::uint64_t capacity_for(const WorkloadSpec& spec) {
  const std::uint64_t blocks = spec.prefill + static_cast<std::uint64_t>(spec.threads) * spec.ops + 4096;
  return std::bit_ceil(std::max<std::uint64_t>(4ull << 20, 2 * blocks * pmem::kLineSize + (1ull << 20)));
}

std::optional<std::filesystem::path> pool_from_env() {
  if (const char* p = std::getenv("MMTK_POOL"); p != nullptr && *p != '\0') return std::filesystem::path(p);
  return std::nullopt;
}

struct Common {
  std::string ds = "msq-cas";
  std::string workload = "pair";
  std::string threads = "4";
  std::uint64_t ops = 0;
  std::uint64_t prefill = 0;
  std::uint64_t seed = 1;
  std::string crash_plan;
  std::string out;
  bool bug_switch = false;
  std::uint64_t patience = Config{}.patience;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--ds", c.ds, "msq-cas | msq-indel | msq-vol | stack (comma list)")->capture_default_str();
  cmd->add_option("--workload", c.workload, "pair | enq0 | enq20 | enq50 | enq80 (comma list)")->capture_default_str();
  cmd->add_option("--threads", c.threads, "thread counts (comma list)")->capture_default_str();
  cmd->add_option("--ops", c.ops, "root operations per thread")->capture_default_str();
  cmd->add_option("--prefill", c.prefill, "items inserted before the run")->capture_default_str();
  cmd->add_option("--seed", c.seed, "workload seed")->capture_default_str();
  cmd->add_option("--crash-plan", c.crash_plan, "crash plan file or inline text");
  cmd->add_option("--out", c.out, "write output to this file instead of stdout");
  cmd->add_option("--patience", c.patience, "clock ticks before a reader helps")->capture_default_str();
  cmd->add_flag("--bug-switch", c.bug_switch, "test only: skip the delete-path location flush");
}

// Writes to --out when given, else stdout.
struct Sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw UsageError("cannot open --out file " + path);
    os = &file;
  }
};

// ---------------------------------------------------------------------------

int bench(const Common& c) {
  const auto kinds = parse_ds_list(c.ds);
  const auto loads = parse_workload_list(c.workload);
  const auto counts = parse_thread_list(c.threads);
  const CrashPlan plan = load_plan(c.crash_plan);
  Sink sink(c.out);
  std::ostream& os = *sink.os;
  os << "ds,workload,threads,ops,seconds,throughput_ops_s,flushes,helps\n";
  bool clean = true;
  for (ds::DsKind k : kinds) {
    for (Workload w : loads) {
      for (std::uint32_t t : counts) {
        RunConfig cfg;
        cfg.spec.ds = k;
        cfg.spec.workload = w;
        cfg.spec.threads = t;
        cfg.spec.ops = c.ops;
        cfg.spec.prefill = c.prefill;
        cfg.spec.seed = c.seed;
        cfg.plan = plan;
        cfg.algo.patience = c.patience;
        cfg.algo.skip_delete_flush = c.bug_switch;
        cfg.capacity = capacity_for(cfg.spec);
        cfg.pool_path = pool_from_env();
        cfg.sweep_each_boot = false;
        RunResult r = run(cfg);
        const std::uint64_t total = static_cast<std::uint64_t>(t) * c.ops;
        const double secs = r.work_seconds > 0 ? r.work_seconds : r.seconds;
        char line[256];
        std::snprintf(line, sizeof line, "%s,%s,%u,%llu,%.6f,%.1f,%llu,%llu\n", ds::ds_name(k).data(),
                      workload_name(w).data(), t, static_cast<unsigned long long>(total), secs,
                      secs > 0 ? static_cast<double>(total) / secs : 0.0,
                      static_cast<unsigned long long>(r.flushes), static_cast<unsigned long long>(r.helps));
        os << line << std::flush;
        if (!r.ok()) {
          clean = false;
          std::cerr << ds::ds_name(k) << " " << workload_name(w) << " " << t << " threads: " << r.errors.front()
                    << "\n";
        }
      }
    }
  }
  return clean ? kExitOk : kExitFail;
}

// ---------------------------------------------------------------------------

void coverage_report(std::ostream& os) {
  os << "coverage (labeled states hit):\n";
  std::uint64_t hit = 0;
  const auto n = static_cast<std::size_t>(Label::kCount);
  for (std::size_t i = 0; i < n; ++i) {
    const Label l = static_cast<Label>(i);
    const std::uint64_t cnt = coverage::count(l);
    hit += cnt > 0;
    os << "  " << (cnt > 0 ? "hit " : "miss") << " " << label_name(l) << " " << cnt << "\n";
  }
  os << "  " << hit << "/" << n << " labels hit\n";
}

// Sequential scenario for window enumeration: each thread's root ops in
// round-robin order on one OS thread, then serial recovery.
EnumScenario window_scenario(const WorkloadSpec& spec_in, Config algo) {
  auto spec = std::make_shared<WorkloadSpec>(spec_in);
  EnumScenario sc;
  sc.options.config = algo;
  sc.make_pool = [spec] {
    // Every crash image copies the pool, so keep it small.
    const std::uint64_t cap = std::bit_ceil(2 * (spec->prefill + spec->threads * spec->ops + 1024) * pmem::kLineSize);
    auto pool = pmem::PmemPool::create_anonymous(std::max<std::uint64_t>(cap, 1 << 20), spec->threads);
    Instance::format(*pool, spec->ds, spec->threads, spec->prefill);
    pool->persist_all();
    return pool;
  };
  sc.script = [spec](Instance& inst, HistoryLog& log) {
    for (std::uint64_t k = 0; k < spec->prefill; ++k) log.event(RecOp::kPrefill, -1, prefill_value(k));
    std::vector<ThreadCtx> ctx;
    for (std::uint32_t t = 0; t < spec->threads; ++t) ctx.emplace_back(inst.env(), t);
    for (std::uint64_t i = 0; i < spec->ops; ++i) {
      for (std::uint32_t t = 0; t < spec->threads; ++t) inst.workload_op(ctx[t], *spec, i);
    }
  };
  sc.recover = [spec](Instance& inst, HistoryLog&) {
    for (std::uint32_t t = 0; t < spec->threads; ++t) {
      ThreadCtx ctx(inst.env(), t, true);
      while (inst.record(t).op_index() < spec->ops) inst.workload_op(ctx, *spec, inst.record(t).op_index());
    }
  };
  sc.check = [](Instance& inst, const HistoryLog& log) -> std::string {
    const auto recs = log.records();
    auto errs = verify_exactly_once(recs, inst.container()->traverse());
    auto df = verify_no_double_free(recs);
    errs.insert(errs.end(), df.begin(), df.end());
    return errs.empty() ? "" : errs.front();
  };
  return sc;
}

int crashtest_windows(const Common& c, const std::string& window, const std::vector<std::uint64_t>& hits,
                      std::uint32_t runs, const std::string& dump_dir, std::uint64_t max_dumps, std::ostream& os) {
  const auto ends = split(window, ':');
  Label from, to;
  if (ends.size() != 2 || !parse_label(ends[0], from) || !parse_label(ends[1], to)) {
    throw UsageError("--window wants FROM:TO label names, got " + window);
  }
  if (!dump_dir.empty()) std::filesystem::create_directories(dump_dir);
  std::uint64_t windows = 0, points = 0, images = 0, failures = 0, skipped = 0, dumped = 0;
  for (ds::DsKind k : parse_ds_list(c.ds)) {
    for (Workload w : parse_workload_list(c.workload)) {
      for (std::uint32_t t : parse_thread_list(c.threads)) {
        for (std::uint32_t run = 0; run < runs; ++run) {
          WorkloadSpec spec;
          spec.ds = k;
          spec.workload = w;
          spec.threads = t;
          spec.ops = c.ops;
          spec.prefill = c.prefill;
          spec.seed = c.seed + run;
          Config algo;
          algo.patience = c.patience;
          algo.skip_delete_flush = c.bug_switch;
          EnumScenario sc = window_scenario(spec, algo);
          const std::string tag = std::string(ds::ds_name(k)) + "-" + std::string(workload_name(w)) + "-t" +
                                  std::to_string(t) + "-s" + std::to_string(spec.seed);
          std::uint64_t hit = 0;
          sc.on_failure = [&](const pmem::Image& img, const std::string& why) {
            os << "violation " << tag << " window #" << hit << ": " << why << "\n";
            if (dump_dir.empty() || dumped >= max_dumps) return;
            const auto path = std::filesystem::path(dump_dir) / (tag + "-" + std::to_string(dumped++) + ".img");
            pmem::PmemPool::write_image(path, img);
            os << "  image written to " << path.string() << "\n";
          };
          for (std::uint64_t h : hits) {
            hit = h;
            EnumReport rep = enumerate_crash_window(sc, from, to, hit);
            if (!rep.window_found) break;
            ++windows;
            points += rep.crash_points;
            images += rep.images;
            // Entries without an image are window errors or crash points
            // with too many dirty lines to enumerate.
            for (const auto& f : rep.failures) {
              if (f.find(" image ") != std::string::npos) {
                ++failures;
              } else {
                ++skipped;
                os << "unverified " << tag << " window #" << hit << ": " << f << "\n";
              }
            }
          }
        }
      }
    }
  }
  os << "windows " << windows << ", crash points " << points << ", images " << images << ", violations "
     << failures << ", unverified crash points " << skipped << "\n";
  if (windows == 0) os << "window " << window << " never reached\n";
  coverage_report(os);
  return failures == 0 && skipped == 0 && windows > 0 ? kExitOk : kExitFail;
}

int crashtest(const Common& c, const std::string& mode, std::uint32_t runs, const std::string& window,
              const std::vector<std::uint64_t>& hits, const std::string& dump_dir, std::uint64_t max_dumps) {
  if (runs == 0) throw UsageError("--runs must be positive");
  Sink sink(c.out);
  std::ostream& os = *sink.os;
  coverage::reset();
  if (!window.empty()) return crashtest_windows(c, window, hits, runs, dump_dir, max_dumps, os);

  Mode m;
  if (mode == "stress") {
    m = Mode::kStress;
  } else if (mode == "scripted") {
    m = Mode::kScripted;
  } else {
    throw UsageError("--mode wants stress or scripted, got " + mode);
  }
  const CrashPlan plan = load_plan(c.crash_plan.empty() ? "kind=full_system; trigger=random; count=5; every=300" : c.crash_plan);
  std::uint64_t bad = 0, boots = 0, full = 0, thread = 0, helps = 0;
  std::uint64_t total_runs = 0;
  for (ds::DsKind k : parse_ds_list(c.ds)) {
    for (Workload w : parse_workload_list(c.workload)) {
      for (std::uint32_t t : parse_thread_list(c.threads)) {
        for (std::uint32_t run_i = 0; run_i < runs; ++run_i) {
          RunConfig cfg;
          cfg.spec.ds = k;
          cfg.spec.workload = w;
          cfg.spec.threads = t;
          cfg.spec.ops = c.ops;
          cfg.spec.prefill = c.prefill;
          cfg.spec.seed = c.seed + run_i;
          cfg.plan = plan;
          cfg.mode = m;
          cfg.algo.patience = c.patience;
          cfg.algo.skip_delete_flush = c.bug_switch;
          cfg.capacity = capacity_for(cfg.spec);
          cfg.pool_path = pool_from_env();
          RunResult r = run(cfg);
          ++total_runs;
          boots += r.boots;
          full += r.full_crashes;
          thread += r.thread_crashes;
          helps += r.helps;
          if (!r.ok()) {
            ++bad;
            os << "FAIL " << ds::ds_name(k) << " " << workload_name(w) << " threads " << t << " seed "
               << cfg.spec.seed << ": " << r.errors.front() << " (" << r.errors.size() << " errors)\n";
          }
        }
      }
    }
  }
  std::string text = plan.to_string();
  while (!text.empty() && text.back() == '\n') text.pop_back();
  std::replace(text.begin(), text.end(), '\n', ';');
  os << "plan: " << text << "\n";
  os << "runs " << total_runs << ", failed " << bad << ", boots " << boots << ", full crashes " << full
     << ", thread crashes " << thread << ", helps " << helps << "\n";
  coverage_report(os);
  return bad == 0 ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detectable persistent lock-free structures: benchmarks and crash campaigns"};
  app.require_subcommand(1);

  Common bc;
  bc.ops = 10000;
  bc.prefill = 100000;
  bc.threads = "1";
  CLI::App* b = app.add_subcommand("bench", "throughput and PM instrumentation counters as CSV");
  add_common(b, bc);

  Common cc;
  cc.ops = 200;
  cc.prefill = 8;
  std::string mode = "stress", window, dump_dir;
  std::uint32_t runs = 1;
  std::uint64_t max_hits = 8;
  std::vector<std::uint64_t> hits;
  std::uint64_t max_dumps = 4;
  CLI::App* ct = app.add_subcommand("crashtest", "crash campaigns with exactly-once and memory-safety checks");
  add_common(ct, cc);
  ct->add_option("--mode", mode, "stress (OS threads) or scripted (seeded interleaving)")->capture_default_str();
  ct->add_option("--runs", runs, "seeds per cell, starting at --seed")->capture_default_str();
  ct->add_option("--window", window, "enumerate every crash image between two labels, FROM:TO");
  ct->add_option("--max-hits", max_hits, "enumerate window occurrences 1..N")->capture_default_str();
  ct->add_option("--hits", hits, "enumerate only these window occurrences (comma list)")->delimiter(',');
  ct->add_option("--dump-dir", dump_dir, "write violating crash images here");
  ct->add_option("--max-dumps", max_dumps, "cap on images written")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (b->parsed()) return bench(bc);
    if (hits.empty()) {
      for (std::uint64_t h = 1; h <= max_hits; ++h) hits.push_back(h);
    }
    return crashtest(cc, mode, runs, window, hits, dump_dir, max_dumps);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pmem::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pmem::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
}
