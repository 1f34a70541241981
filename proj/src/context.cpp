#include "mmtk/context.hpp"

namespace mmtk {

namespace {

constexpr std::array<std::string_view, static_cast<std::size_t>(Label::kCount)> kNames = {
    "ckpt.after_buf",
    "ckpt.after_ts",
    "ckpt.detected",
    "cas.after_first_cas",
    "cas.after_flush_loc",
    "cas.after_memento_store",
    "cas.after_second_cas",
    "cas.after_fail",
    "cas.rec.stale",
    "cas.rec.fail",
    "cas.rec.not_last",
    "cas.rec.resume36",
    "cas.rec.resume33",
    "cas.rec.resume34",
    "cas.rec.normal",
    "cas.help.raised",
    "cas.help.applied",
    "load.flushed",
    "ins.after_cas",
    "ins.after_flush",
    "ins.rec.contained",
    "ins.rec.spurious",
    "del.after_repl_cas",
    "del.after_loc_cas",
    "del.rec.resume",
    "del.rec.err",
    "del.help.applied",
    "smr.unpin.begin",
    "smr.unpin.after_flush",
    "smr.unpin.end",
    "smr.clear.after_flag",
    "smr.clear.after_subs",
    "smr.clear.done",
    "op.begin",
};

std::array<std::atomic<std::uint64_t>, static_cast<std::size_t>(Label::kCount)> g_hits{};

}  // namespace

std::string_view label_name(Label l) { return kNames.at(static_cast<std::size_t>(l)); }

bool parse_label(std::string_view name, Label& out) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) {
      out = static_cast<Label>(i);
      return true;
    }
  }
  return false;
}

namespace coverage {
void hit(Label l) { g_hits[static_cast<std::size_t>(l)].fetch_add(1, std::memory_order_relaxed); }
std::uint64_t count(Label l) { return g_hits[static_cast<std::size_t>(l)].load(); }
void reset() {
  for (auto& h : g_hits) h.store(0);
}
}  // namespace coverage

}  // namespace mmtk
