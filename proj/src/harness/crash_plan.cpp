#include "mmtk/harness/crash_plan.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <random>
#include <sstream>

namespace mmtk::harness {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw pmem::ConfigError("crash plan: bad number for " + std::string(key) + ": " + std::string(v));
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    auto p = s.find(sep);
    auto part = trim(s.substr(0, p));
    if (!part.empty()) out.push_back(part);
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

}  // namespace

CrashPlan CrashPlan::parse(std::string_view text) {
  CrashPlan plan;
  std::string normalized(text);
  std::replace(normalized.begin(), normalized.end(), ';', '\n');
  std::istringstream is(normalized);
  std::string raw;
  while (std::getline(is, raw)) {
    std::string_view line(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw pmem::ConfigError("crash plan: expected key=value: " + std::string(line));
    auto key = trim(line.substr(0, eq));
    auto val = trim(line.substr(eq + 1));
    if (key == "kind") {
      if (val == "none") {
        plan.kind = CrashKind::kNone;
      } else if (val == "full_system") {
        plan.kind = CrashKind::kFullSystem;
      } else if (val == "thread") {
        plan.kind = CrashKind::kThread;
      } else {
        throw pmem::ConfigError("crash plan: unknown kind " + std::string(val));
      }
    } else if (key == "trigger") {
      if (val == "random") {
        plan.trigger = Trigger::kRandom;
      } else if (val == "label") {
        plan.trigger = Trigger::kLabel;
      } else if (val == "op_count") {
        plan.trigger = Trigger::kOpCount;
      } else {
        throw pmem::ConfigError("crash plan: unknown trigger " + std::string(val));
      }
    } else if (key == "count") {
      plan.count = static_cast<std::uint32_t>(to_u64(key, val));
    } else if (key == "every") {
      plan.every = to_u64(key, val);
    } else if (key == "labels" || key == "label") {
      for (auto name : split(val, ',')) {
        Label l;
        if (!parse_label(name, l)) throw pmem::ConfigError("crash plan: unknown label " + std::string(name));
        plan.labels.push_back(l);
      }
    } else if (key == "occurrence") {
      plan.occurrence = to_u64(key, val);
    } else if (key == "at_ops") {
      for (auto n : split(val, ',')) plan.at_ops.push_back(to_u64(key, n));
    } else if (key == "tid") {
      plan.tid = val == "any" ? -1 : static_cast<int>(to_u64(key, val));
    } else if (key == "model") {
      if (val == "revert_all_dirty") {
        plan.model = pmem::CrashModel::Mode::kRevertAllDirty;
      } else if (val == "per_line_random") {
        plan.model = pmem::CrashModel::Mode::kPerLineRandom;
      } else {
        throw pmem::ConfigError("crash plan: unsupported model " + std::string(val));
      }
    } else if (key == "seed") {
      plan.seed = to_u64(key, val);
    } else {
      throw pmem::ConfigError("crash plan: unknown key " + std::string(key));
    }
  }
  if (plan.kind == CrashKind::kThread && plan.trigger == Trigger::kOpCount) {
    throw pmem::ConfigError("crash plan: thread crashes need a label or random trigger");
  }
  return plan;
}

std::string CrashPlan::to_string() const {
  std::ostringstream os;
  os << "kind=" << (kind == CrashKind::kNone ? "none" : kind == CrashKind::kThread ? "thread" : "full_system") << '\n';
  os << "trigger="
     << (trigger == Trigger::kRandom ? "random" : trigger == Trigger::kLabel ? "label" : "op_count") << '\n';
  os << "count=" << count << '\n';
  if (every != 0) os << "every=" << every << '\n';
  if (!labels.empty()) {
    os << "labels=";
    for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? "," : "") << label_name(labels[i]);
    os << '\n';
  }
  if (occurrence != 0) os << "occurrence=" << occurrence << '\n';
  if (!at_ops.empty()) {
    os << "at_ops=";
    for (std::size_t i = 0; i < at_ops.size(); ++i) os << (i ? "," : "") << at_ops[i];
    os << '\n';
  }
  if (tid >= 0) os << "tid=" << tid << '\n';
  os << "model=" << (model == pmem::CrashModel::Mode::kPerLineRandom ? "per_line_random" : "revert_all_dirty")
     << '\n';
  if (seed != 0) os << "seed=" << seed << '\n';
  return os.str();
}

CrashInjector::CrashInjector(const CrashPlan& plan, std::uint64_t seed, std::uint64_t total_ops)
    : plan_(plan), label_mask_(static_cast<std::size_t>(Label::kCount), plan.labels.empty()) {
  for (Label l : plan.labels) label_mask_[static_cast<std::size_t>(l)] = true;
  if (plan.kind == CrashKind::kNone) return;
  std::mt19937_64 rng(plan.seed != 0 ? plan.seed : seed);
  if (plan.trigger == Trigger::kOpCount) {
    thresholds_ = plan.at_ops;
  } else if (plan.trigger == Trigger::kLabel && plan.occurrence != 0) {
    thresholds_ = {plan.occurrence};
  } else if (plan.kind == CrashKind::kFullSystem && plan.trigger == Trigger::kRandom && plan.every == 0) {
    if (total_ops > 1) {
      std::uniform_int_distribution<std::uint64_t> d(1, total_ops - 1);
      for (std::uint32_t i = 0; i < plan.count; ++i) thresholds_.push_back(d(rng));
    }
  } else {
    std::uint64_t gap = plan.every != 0 ? plan.every : (plan.trigger == Trigger::kLabel ? 50 : 500);
    std::uniform_int_distribution<std::uint64_t> d(0, 2 * gap);
    std::uint64_t at = 0;
    for (std::uint32_t i = 0; i < plan.count; ++i) {
      at += 1 + d(rng);
      thresholds_.push_back(at);
    }
  }
  std::sort(thresholds_.begin(), thresholds_.end());
  thresholds_.erase(std::unique(thresholds_.begin(), thresholds_.end()), thresholds_.end());
}

bool CrashInjector::eligible(ThreadCtx& ctx, Label l) const {
  if (!label_mask_[static_cast<std::size_t>(l)]) return false;
  return plan_.tid < 0 || static_cast<std::uint32_t>(plan_.tid) == ctx.tid();
}

bool CrashInjector::on_op_complete(pmem::PmemPool& pool) {
  if (plan_.kind != CrashKind::kFullSystem || !enabled_.load()) return false;
  const bool by_ops = plan_.trigger == Trigger::kOpCount || (plan_.trigger == Trigger::kRandom && plan_.every == 0);
  if (!by_ops) return false;
  std::uint64_t n = counter_.fetch_add(1) + 1;
  std::uint64_t idx = next_event_.load();
  if (idx < thresholds_.size() && n >= thresholds_[idx] && next_event_.compare_exchange_strong(idx, idx + 1)) {
    pool.request_crash();
    return true;
  }
  return false;
}

void CrashInjector::on_point(ThreadCtx& ctx, Label l) {
  if (next_ != nullptr) next_->on_point(ctx, l);
  if (plan_.kind == CrashKind::kNone || !enabled_.load() || !eligible(ctx, l)) return;
  if (plan_.kind == CrashKind::kFullSystem &&
      (plan_.trigger == Trigger::kOpCount || (plan_.trigger == Trigger::kRandom && plan_.every == 0))) {
    return;
  }
  std::uint64_t n = counter_.fetch_add(1) + 1;
  std::uint64_t idx = next_event_.load();
  if (idx >= thresholds_.size() || n != thresholds_[idx]) return;
  if (!next_event_.compare_exchange_strong(idx, idx + 1)) return;
  if (plan_.kind == CrashKind::kThread) throw ThreadCrash{};
  ctx.pool().request_crash();
  throw pmem::SystemCrash{};
}

void CrashInjector::on_cas_installed(ThreadCtx& ctx, Offset loc, std::uint64_t w) {
  if (next_ != nullptr) next_->on_cas_installed(ctx, loc, w);
}
void CrashInjector::on_cas_committed(ThreadCtx& ctx, std::uint64_t m) {
  if (next_ != nullptr) next_->on_cas_committed(ctx, m);
}
void CrashInjector::on_help(ThreadCtx& ctx, Offset loc, std::uint64_t w, Timestamp t) {
  if (log_ != nullptr) log_->event(RecOp::kHelp, static_cast<std::int32_t>(ctx.tid()), loc, t);
  if (next_ != nullptr) next_->on_help(ctx, loc, w, t);
}
void CrashInjector::on_repl_commit(ThreadCtx& ctx, Offset block, std::uint64_t repl) {
  if (next_ != nullptr) next_->on_repl_commit(ctx, block, repl);
}
void CrashInjector::on_retire(ThreadCtx& ctx, Offset block) {
  if (log_ != nullptr) log_->event(RecOp::kRetire, static_cast<std::int32_t>(ctx.tid()), block);
  if (next_ != nullptr) next_->on_retire(ctx, block);
}
void CrashInjector::on_checkpoint(ThreadCtx& ctx, Offset mmt, Timestamp ts) {
  if (next_ != nullptr) next_->on_checkpoint(ctx, mmt, ts);
}

}  // namespace mmtk::harness
