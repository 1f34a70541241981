#pragma once

#include <cstdint>

#include "mmtk/context.hpp"

// Detectable CAS on a one-word location with a one-word memento. Values
// passed in and returned are stable CasWords (parity Even, tid 0), i.e.
// casword::make(tag, offset).
namespace mmtk::dcas {

inline constexpr std::size_t kLocationBytes = 8;
inline constexpr std::size_t kMementoBytes = 8;

struct CasResult {
  bool ok = false;
  std::uint64_t current = 0;  // new value on success, stable current value on failure
};

std::uint64_t load(ThreadCtx& ctx, Offset loc);
std::uint64_t load_help(ThreadCtx& ctx, Offset loc, std::uint64_t old);
CasResult cas(ThreadCtx& ctx, Offset loc, std::uint64_t old, std::uint64_t desired, Offset mmt);
void memento_clear(pmem::PmemPool& pool, Offset mmt);

}  // namespace mmtk::dcas
