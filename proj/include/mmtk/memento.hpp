#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mmtk/pmem/pool.hpp"

namespace mmtk {

// One sub-memento inside a composite memento body.
struct MementoField {
  enum class Kind { kCheckpoint, kCas };
  std::string_view name;
  Kind kind;
  pmem::Offset rel;   // byte offset inside the body
  std::size_t words;  // checkpoint buffer words (0 for CAS)
  std::uint8_t handle_mask = 0;  // buffer words that hold block offsets
  std::string_view sub_op;       // the syntactic sub-operation it serves

  std::size_t bytes() const { return kind == Kind::kCas ? 8 : 2 * 8 * (words + 1); }
  // Pool offsets of the timestamp-carrying words.
  std::vector<pmem::Offset> ts_words(pmem::Offset body) const {
    if (kind == Kind::kCas) return {body + rel};
    return {body + rel, body + rel + 8 * (words + 1)};
  }
};

using MementoTable = std::span<const MementoField>;

inline std::size_t memento_table_bytes(MementoTable t) {
  std::size_t end = 0;
  for (const auto& f : t) end = std::max<std::size_t>(end, f.rel + f.bytes());
  return end;
}

}  // namespace mmtk
