#pragma once

#include <cstdint>
#include <stdexcept>

#include "mmtk/pmem/pool.hpp"

// Bit-exact 64-bit word encodings shared by the detectable locations.
// Thread ids are 0-based in the API and stored as tid+1, because an encoded
// tid of 0 means "no owner".
namespace mmtk {

using pmem::Offset;

enum class Parity : std::uint8_t { kEven = 0, kOdd = 1 };
inline Parity operator!(Parity p) { return p == Parity::kEven ? Parity::kOdd : Parity::kEven; }

inline constexpr std::uint64_t kTsMask = (1ull << 62) - 1;
inline constexpr std::uint32_t kMaxTid = 510;  // 9-bit field minus the reserved 0

inline std::uint64_t encode_tid(std::uint32_t tid) {
  if (tid > kMaxTid) throw std::out_of_range("thread id does not fit in 9 bits");
  return tid + 1;
}

// CasWord: bit 63 parity, 62..54 tid, 53..45 tag, 44..0 offset.
namespace casword {
inline constexpr std::uint64_t kTagMask = (1ull << 9) - 1;
inline std::uint64_t make(std::uint64_t tag, Offset off) {
  if (tag > kTagMask) throw std::out_of_range("CasWord tag exceeds 9 bits");
  if (off > pmem::kOffsetMask) throw std::out_of_range("offset exceeds 45 bits");
  return (tag << 45) | off;
}
inline std::uint64_t encode(Parity p, std::uint64_t raw_tid, std::uint64_t stable) {
  return (static_cast<std::uint64_t>(p) << 63) | (raw_tid << 54) | (stable & ((1ull << 54) - 1));
}
inline Parity parity(std::uint64_t w) { return static_cast<Parity>(w >> 63); }
inline std::uint64_t raw_tid(std::uint64_t w) { return (w >> 54) & 0x1ff; }
inline std::uint64_t tag(std::uint64_t w) { return (w >> 45) & kTagMask; }
inline Offset offset(std::uint64_t w) { return w & pmem::kOffsetMask; }
// Tag and offset only: the value with annotations stripped.
inline std::uint64_t stable(std::uint64_t w) { return w & ((1ull << 54) - 1); }
inline bool is_stable(std::uint64_t w) { return raw_tid(w) == 0; }
}  // namespace casword

// CasMemento: bit 63 parity, bit 62 fail, 61..0 timestamp.
namespace casmmt {
inline std::uint64_t encode(Parity p, bool fail, std::uint64_t ts) {
  return (static_cast<std::uint64_t>(p) << 63) | (static_cast<std::uint64_t>(fail) << 62) | (ts & kTsMask);
}
inline Parity parity(std::uint64_t w) { return static_cast<Parity>(w >> 63); }
inline bool fail(std::uint64_t w) { return ((w >> 62) & 1) != 0; }
inline std::uint64_t ts(std::uint64_t w) { return w & kTsMask; }
}  // namespace casmmt

// InsDelWord: bit 63 persist, 62..55 reserved (zero), 54..45 tag, 44..0 offset.
namespace indelword {
inline constexpr std::uint64_t kTagMask = (1ull << 10) - 1;
inline constexpr std::uint64_t kPersist = 1ull << 63;
inline std::uint64_t make(std::uint64_t tag, Offset off) {
  if (tag > kTagMask) throw std::out_of_range("InsDelWord tag exceeds 10 bits");
  if (off > pmem::kOffsetMask) throw std::out_of_range("offset exceeds 45 bits");
  return (tag << 45) | off;
}
inline std::uint64_t encode(bool persist, std::uint64_t stable) {
  return (persist ? kPersist : 0) | (stable & ((1ull << 55) - 1));
}
inline bool persist(std::uint64_t w) { return (w & kPersist) != 0; }
inline std::uint64_t reserved(std::uint64_t w) { return (w >> 55) & 0xff; }
inline std::uint64_t tag(std::uint64_t w) { return (w >> 45) & kTagMask; }
inline Offset offset(std::uint64_t w) { return w & pmem::kOffsetMask; }
inline std::uint64_t stable(std::uint64_t w) { return w & ((1ull << 55) - 1); }
}  // namespace indelword

// ReplWord: 63..55 tid, 54..45 tag, 44..0 offset.
namespace replword {
inline std::uint64_t encode(std::uint64_t raw_tid, std::uint64_t stable) {
  return (raw_tid << 55) | (stable & ((1ull << 55) - 1));
}
inline std::uint64_t raw_tid(std::uint64_t w) { return w >> 55; }
inline std::uint64_t tag(std::uint64_t w) { return (w >> 45) & indelword::kTagMask; }
inline Offset offset(std::uint64_t w) { return w & pmem::kOffsetMask; }
inline std::uint64_t stable(std::uint64_t w) { return w & ((1ull << 55) - 1); }
}  // namespace replword

}  // namespace mmtk
