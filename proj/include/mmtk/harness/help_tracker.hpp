#pragma once

#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmtk/clock.hpp"
#include "mmtk/context.hpp"
#include "mmtk/words.hpp"

namespace mmtk::harness {

// Ground truth for the HELP array. For thread p's n-th successful CAS (with
// parity p_n) and the commit timestamp t_{n-1} of its previous one:
//   t_{n-1} < HELP[p_n][p]  iff  some CAS m >= n of p with parity p_n was
//   observed annotated by a helper that then raised HELP.
// Requires every installed annotated word to be unique within the run.
class HelpTracker : public Tracer {
 public:
  explicit HelpTracker(std::uint32_t threads) : cas_(threads) {}

  void on_cas_installed(ThreadCtx& ctx, Offset loc, std::uint64_t annotated) override;
  void on_cas_committed(ThreadCtx& ctx, std::uint64_t memento) override;
  void on_help(ThreadCtx& ctx, Offset loc, std::uint64_t annotated, Timestamp t_cur) override;

  // `help_word(parity, tid)` must read HELP without side effects.
  template <class ReadHelp>
  std::vector<std::string> check(ReadHelp&& help_word) const;

  std::uint64_t help_events() const;
  std::uint64_t installed() const;

 private:
  struct Cas {
    Parity parity;
    Timestamp ts = 0;
  };
  mutable std::mutex mu_;
  std::vector<std::vector<Cas>> cas_;
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::size_t>> by_word_;
  std::vector<std::uint64_t> helped_words_;
  bool ambiguous_ = false;
};

template <class ReadHelp>
std::vector<std::string> HelpTracker::check(ReadHelp&& help_word) const {
  std::lock_guard<std::mutex> g(mu_);
  std::vector<std::string> out;
  if (ambiguous_) out.push_back("annotated words were not unique; tracker cannot attribute helps");
  std::vector<std::set<std::size_t>> helped(cas_.size());
  for (std::uint64_t w : helped_words_) {
    auto it = by_word_.find(w);
    if (it == by_word_.end()) {
      out.push_back("help observed a word no CAS installed");
      continue;
    }
    helped[it->second.first].insert(it->second.second);
  }
  for (std::uint32_t tid = 0; tid < cas_.size(); ++tid) {
    const auto& v = cas_[tid];
    for (std::size_t n = 0; n < v.size(); ++n) {
      const Timestamp prev = n == 0 ? 0 : v[n - 1].ts;
      if (n > 0 && prev == 0) continue;  // previous CAS still in flight
      const Parity p = v[n].parity;
      const bool lhs = prev < help_word(p, tid);
      bool rhs = false;
      for (auto it = helped[tid].lower_bound(n); it != helped[tid].end() && !rhs; ++it) {
        rhs = v[*it].parity == p;
      }
      if (lhs != rhs) {
        out.push_back("thread " + std::to_string(tid) + " CAS " + std::to_string(n + 1) + ": HELP says " +
                      (lhs ? "helped" : "not helped") + ", events say " + (rhs ? "helped" : "not helped"));
      }
    }
  }
  return out;
}

}  // namespace mmtk::harness
