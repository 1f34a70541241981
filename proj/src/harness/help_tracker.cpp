#include "mmtk/harness/help_tracker.hpp"

namespace mmtk::harness {

void HelpTracker::on_cas_installed(ThreadCtx& ctx, Offset, std::uint64_t annotated) {
  std::lock_guard<std::mutex> g(mu_);
  auto& v = cas_.at(ctx.tid());
  if (!by_word_.emplace(annotated, std::make_pair(ctx.tid(), v.size())).second) ambiguous_ = true;
  v.push_back({casword::parity(annotated), 0});
}

void HelpTracker::on_cas_committed(ThreadCtx& ctx, std::uint64_t memento) {
  std::lock_guard<std::mutex> g(mu_);
  auto& v = cas_.at(ctx.tid());
  // A recovery execution may commit a CAS installed before a thread crash;
  // it is always the thread's latest one.
  if (!v.empty() && v.back().ts == 0) v.back().ts = casmmt::ts(memento);
}

void HelpTracker::on_help(ThreadCtx&, Offset, std::uint64_t annotated, Timestamp) {
  std::lock_guard<std::mutex> g(mu_);
  helped_words_.push_back(annotated);
}

std::uint64_t HelpTracker::help_events() const {
  std::lock_guard<std::mutex> g(mu_);
  return helped_words_.size();
}

std::uint64_t HelpTracker::installed() const {
  std::lock_guard<std::mutex> g(mu_);
  std::uint64_t n = 0;
  for (const auto& v : cas_) n += v.size();
  return n;
}

}  // namespace mmtk::harness
