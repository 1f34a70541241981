#pragma once

#include <cstdint>

#include "mmtk/context.hpp"

// Detectable insert (Null -> block) and delete (block -> successor) on a
// one-word location. Blocks passed to insert/delete carry a ReplWord at
// byte offset kReplField. Values are stable InsDelWords:
// indelword::make(tag, offset).
namespace mmtk::insdel {

inline constexpr Offset kReplField = 16;

inline Offset repl_of(std::uint64_t block_word) { return indelword::offset(block_word) + kReplField; }

// Capability a data structure supplies for direct-tracking recovery. Only
// called during recovery, which the monitor runs quiesced.
class Traversable {
 public:
  virtual ~Traversable() = default;
  virtual bool contains(Offset block) const = 0;
};

struct Result {
  bool ok = false;
  std::uint64_t current = 0;
  // Recovery could not show the insert happened; retry as a normal insert.
  bool spurious = false;
};

std::uint64_t load(ThreadCtx& ctx, Offset loc);
Result insert(ThreadCtx& ctx, Offset loc, std::uint64_t block, const Traversable& ds);
// On success `current` is `old`, the detached block.
Result remove(ThreadCtx& ctx, Offset loc, std::uint64_t old, std::uint64_t desired);
std::uint64_t load_help(ThreadCtx& ctx, Offset loc, std::uint64_t old);

}  // namespace mmtk::insdel
