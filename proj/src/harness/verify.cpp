#include "mmtk/harness/verify.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <tuple>
#include <unordered_map>

#include "mmtk/ds/container.hpp"

namespace mmtk::harness {

namespace {

using Key = std::tuple<std::int32_t, std::uint64_t, bool>;  // tid, index, insert side

struct Logical {
  bool insert = false;
  std::uint64_t arg = 0;
  bool has_inv = false, has_res = false;
  std::uint64_t inv = 0, res = 0;
  std::uint64_t result = 0;
  bool conflicting = false;
};

std::map<Key, Logical> collect(const std::vector<Record>& log) {
  std::map<Key, Logical> ops;
  for (const auto& r : log) {
    if (r.kind == RecKind::kEvt) continue;
    Logical& l = ops[{r.tid, r.index, r.is_insert()}];
    l.insert = r.is_insert();
    if (r.kind == RecKind::kInv) {
      if (!l.has_inv) {
        l.has_inv = true;
        l.inv = r.seq;
        l.arg = r.arg;
      }
      continue;
    }
    const std::uint64_t outcome = r.is_insert() ? r.arg : r.result;
    if (!l.has_res) {
      l.has_res = true;
      l.res = r.seq;
      l.result = outcome;
    } else if (l.result != outcome) {
      l.conflicting = true;
    }
  }
  return ops;
}

std::string key_str(const Key& k) {
  return "tid " + std::to_string(std::get<0>(k)) + " op " + std::to_string(std::get<1>(k)) +
         (std::get<2>(k) ? " insert" : " remove");
}

}  // namespace

std::vector<std::string> verify_exactly_once(const std::vector<Record>& log,
                                             const std::vector<std::uint64_t>& final_contents) {
  std::vector<std::string> errors;
  std::unordered_map<std::uint64_t, std::int64_t> balance;  // inserted - removed - present
  std::unordered_map<std::uint64_t, int> inserted;
  for (const auto& r : log) {
    if (r.kind == RecKind::kEvt && r.op == RecOp::kPrefill) {
      balance[r.arg] += 1;
      inserted[r.arg] += 1;
    }
  }
  for (const auto& [key, l] : collect(log)) {
    if (!l.has_res) {
      errors.push_back(key_str(key) + " never completed");
      continue;
    }
    if (l.conflicting) errors.push_back(key_str(key) + " reported different responses across executions");
    if (l.insert) {
      balance[l.result] += 1;
      inserted[l.result] += 1;
    } else if (l.result != ds::kEmpty) {
      balance[l.result] -= 1;
    }
  }
  for (std::uint64_t v : final_contents) balance[v] -= 1;
  for (const auto& [v, n] : inserted) {
    if (n > 1) errors.push_back("value " + std::to_string(v) + " inserted " + std::to_string(n) + " times");
  }
  std::vector<std::pair<std::uint64_t, std::int64_t>> bad;
  for (const auto& [v, b] : balance) {
    if (b != 0) bad.emplace_back(v, b);
  }
  std::sort(bad.begin(), bad.end());
  for (const auto& [v, b] : bad) {
    errors.push_back("value " + std::to_string(v) + (b > 0 ? " lost" : " duplicated") + " (balance " +
                     std::to_string(b) + ")");
  }
  return errors;
}

std::vector<std::string> verify_no_double_free(const std::vector<Record>& log) {
  std::vector<std::string> errors;
  std::unordered_map<std::uint64_t, bool> live;
  for (const auto& r : log) {
    if (r.kind != RecKind::kEvt) continue;
    if (r.op == RecOp::kAlloc) {
      live[r.arg] = true;
    } else if (r.op == RecOp::kFree) {
      auto it = live.find(r.arg);
      if (it != live.end() && !it->second) {
        errors.push_back("block " + std::to_string(r.arg) + " freed twice (seq " + std::to_string(r.seq) + ")");
      }
      live[r.arg] = false;
    }
  }
  return errors;
}

std::vector<LinOp> logical_ops(const std::vector<Record>& log) {
  std::vector<LinOp> out;
  for (const auto& [key, l] : collect(log)) {
    if (!l.has_inv || !l.has_res) continue;
    out.push_back({std::get<0>(key), l.insert, l.result, l.inv, l.res});
  }
  std::sort(out.begin(), out.end(), [](const LinOp& a, const LinOp& b) { return a.inv < b.inv; });
  return out;
}

namespace {

bool search(std::span<const LinOp> ops, std::vector<bool>& used, std::size_t left, std::deque<std::uint64_t>& state,
            bool fifo) {
  if (left == 0) return true;
  std::uint64_t min_res = ~0ull;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (!used[i]) min_res = std::min(min_res, ops[i].res);
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (used[i] || ops[i].inv > min_res) continue;
    const LinOp& op = ops[i];
    used[i] = true;
    if (op.insert) {
      state.push_back(op.value);
      if (search(ops, used, left - 1, state, fifo)) return true;
      state.pop_back();
    } else if (state.empty()) {
      if (op.value == ds::kEmpty && search(ops, used, left - 1, state, fifo)) return true;
    } else {
      const std::uint64_t v = fifo ? state.front() : state.back();
      if (op.value == v) {
        if (fifo) {
          state.pop_front();
        } else {
          state.pop_back();
        }
        if (search(ops, used, left - 1, state, fifo)) return true;
        if (fifo) {
          state.push_front(v);
        } else {
          state.push_back(v);
        }
      }
    }
    used[i] = false;
  }
  return false;
}

}  // namespace

bool linearizable(std::span<const LinOp> ops, bool fifo, const std::vector<std::uint64_t>& initial,
                  std::string* why) {
  std::vector<bool> used(ops.size(), false);
  std::deque<std::uint64_t> state(initial.begin(), initial.end());
  if (search(ops, used, ops.size(), state, fifo)) return true;
  if (why != nullptr) *why = "no legal sequential order for " + std::to_string(ops.size()) + " operations";
  return false;
}

}  // namespace mmtk::harness
