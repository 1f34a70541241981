#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmtk/harness/history.hpp"

namespace mmtk::harness {

// Every completed insert's value is removed or still present exactly once;
// re-executed operations report identical responses.
std::vector<std::string> verify_exactly_once(const std::vector<Record>& log,
                                             const std::vector<std::uint64_t>& final_contents);

// No block is freed twice without an allocation in between.
std::vector<std::string> verify_no_double_free(const std::vector<Record>& log);

// One logical operation with its real-time interval: first invocation to
// first response, in log sequence numbers.
struct LinOp {
  std::int32_t tid = 0;
  bool insert = false;
  std::uint64_t value = 0;  // argument of an insert, result of a remove
  std::uint64_t inv = 0;
  std::uint64_t res = 0;
};

std::vector<LinOp> logical_ops(const std::vector<Record>& log);

// Brute-force search for a legal sequential order. `fifo` selects queue
// semantics, otherwise stack. `initial` is the front-to-back (queue) or
// bottom-to-top (stack) starting content.
bool linearizable(std::span<const LinOp> ops, bool fifo, const std::vector<std::uint64_t>& initial = {},
                  std::string* why = nullptr);

}  // namespace mmtk::harness
