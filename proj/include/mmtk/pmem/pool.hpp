#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmtk::pmem {

using Offset = std::uint64_t;

inline constexpr std::size_t kLineSize = 64;
inline constexpr std::size_t kWordsPerLine = kLineSize / 8;
inline constexpr std::size_t kHeaderSize = 4096;
inline constexpr std::uint64_t kOffsetBits = 45;
inline constexpr std::uint64_t kOffsetMask = (1ull << kOffsetBits) - 1;
inline constexpr std::uint64_t kMaxCapacity = 1ull << kOffsetBits;
inline constexpr Offset kNull = 0;
inline constexpr std::uint32_t kDefaultMaxThreads = 64;
inline constexpr std::size_t kMaxEnumerateLines = 12;

// Misuse of the pool API (misaligned or out-of-bounds access).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Header does not describe a valid pool.
class CorruptPoolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reopen with parameters that disagree with the header.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Enumerate requested over too many dirty lines.
class ExplosionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown out of any pool access once a system crash has been requested.
// Deliberately not a std::exception so generic handlers do not swallow it.
struct SystemCrash {};

// Fixed header word offsets. All fields are little-endian u64.
namespace header {
inline constexpr Offset kMagic = 0x00;  // "MMTK" + u32 version
inline constexpr Offset kCapacity = 0x08;
inline constexpr Offset kRootOffset = 0x10;
inline constexpr Offset kClearingOffset = 0x18;
inline constexpr Offset kHelpOffset = 0x20;
inline constexpr Offset kMaxThreads = 0x28;
inline constexpr Offset kLineSize = 0x30;
inline constexpr Offset kBitmapOffset = 0x38;
inline constexpr Offset kContBitmapOffset = 0x40;
inline constexpr Offset kHeapOffset = 0x48;
inline constexpr Offset kHeapSlots = 0x50;
inline constexpr Offset kFormatted = 0x58;
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint64_t kMagicWord =
    0x4b544d4dull | (static_cast<std::uint64_t>(kVersion) << 32);
}  // namespace header

struct Layout {
  std::uint64_t capacity = 0;
  std::uint32_t max_threads = 0;
  Offset clearing_offset = 0;  // one line per thread
  Offset help_offset = 0;      // HELP[2][P] words
  Offset bitmap_offset = 0;
  Offset cont_bitmap_offset = 0;
  Offset heap_offset = 0;
  std::uint64_t heap_slots = 0;
};

struct CrashModel {
  enum class Mode { kRevertAllDirty, kPerLineRandom, kEnumerate };
  Mode mode = Mode::kRevertAllDirty;
  std::uint64_t seed = 0;

  static CrashModel revert_all_dirty() { return {Mode::kRevertAllDirty, 0}; }
  static CrashModel per_line_random(std::uint64_t seed) { return {Mode::kPerLineRandom, seed}; }
  static CrashModel enumerate() { return {Mode::kEnumerate, 0}; }
};

using Image = std::vector<std::uint64_t>;

// Images a crash can leave behind. Enumerate yields one image per subset of
// dirty lines; the other models yield exactly one.
class CrashImageSet {
 public:
  std::size_t size() const;
  Image image(std::size_t index) const;
  const std::vector<std::size_t>& dirty_lines() const { return dirty_lines_; }
  // True when dirty line j keeps its unflushed content in image `index`.
  bool keeps(std::size_t index, std::size_t j) const;

 private:
  friend class PmemPool;
  CrashModel::Mode mode_ = CrashModel::Mode::kRevertAllDirty;
  Image persisted_;
  std::vector<std::size_t> dirty_lines_;
  std::vector<std::array<std::uint64_t, kWordsPerLine>> dirty_content_;
  std::vector<bool> random_keep_;
};

// Called before every pool access; used by the scripted scheduler.
class AccessHook {
 public:
  virtual ~AccessHook() = default;
  virtual void on_access() = 0;
};

struct PoolStats {
  std::uint64_t flushes = 0;  // flush + flush_opt instructions
  std::uint64_t fences = 0;
  std::uint64_t cas = 0;
};

class PmemPool {
 public:
  // Create a new file-backed pool or reopen an existing one.
  static std::unique_ptr<PmemPool> open(const std::filesystem::path& path, std::uint64_t capacity,
                                        std::uint32_t max_threads = kDefaultMaxThreads);
  static std::unique_ptr<PmemPool> create_anonymous(std::uint64_t capacity,
                                                    std::uint32_t max_threads = kDefaultMaxThreads);
  // Boot an anonymous pool from a crash image.
  static std::unique_ptr<PmemPool> from_image(const Image& image);
  // Overwrite a pool file with a crash image.
  static void write_image(const std::filesystem::path& path, const Image& image);

  ~PmemPool();
  PmemPool(const PmemPool&) = delete;
  PmemPool& operator=(const PmemPool&) = delete;

  const Layout& layout() const { return layout_; }
  std::uint64_t capacity() const { return layout_.capacity; }
  Offset root_offset() const { return load_word(header::kRootOffset); }
  void set_root_offset(Offset off);

  std::uint64_t load_word(Offset off) const;
  void store_word(Offset off, std::uint64_t v);
  // Returns true on success; on failure `expected` receives the current content.
  bool cas_word(Offset off, std::uint64_t& expected, std::uint64_t desired);

  void flush(Offset off);
  void flush_opt(Offset off);
  void sfence();

  // Inspection (quiesced or test use). These bypass the access hook and
  // the crash flag.
  std::uint64_t peek_word(Offset off) const;
  bool line_dirty(Offset off) const;
  std::uint64_t persisted_word(Offset off) const;
  std::size_t dirty_line_count() const;
  // Persist every dirty line (test setup helper).
  void persist_all();

  // Crash simulation. Requires quiescence.
  CrashImageSet crash(const CrashModel& model) const;
  Image current_image() const;

  // Make every subsequent access throw SystemCrash.
  void request_crash() { crashing_.store(true, std::memory_order_release); }
  bool crashing() const { return crashing_.load(std::memory_order_acquire); }

  void set_hook(AccessHook* hook) { hook_ = hook; }
  // Drop the calling thread's pending flush_opt set (a thread crash loses it).
  void discard_pending();

  PoolStats stats() const;
  void reset_stats();

 private:
  struct Backing;
  PmemPool();
  void init_from_snapshot(bool zero_fill);
  void format(std::uint32_t max_threads);
  void load_layout();
  void check(Offset off) const;
  void enter() const;
  void persist_line(std::size_t line);

  Layout layout_;
  std::uint64_t uid_ = 0;
  std::size_t lines_ = 0;
  std::unique_ptr<std::atomic<std::uint64_t>[]> words_;
  std::unique_ptr<std::atomic<std::uint8_t>[]> dirty_;
  std::unique_ptr<Backing> backing_;
  std::uint64_t* snapshot_ = nullptr;
  std::atomic<bool> crashing_{false};
  AccessHook* hook_ = nullptr;
  mutable std::atomic<std::uint64_t> flushes_{0};
  mutable std::atomic<std::uint64_t> fences_{0};
  mutable std::atomic<std::uint64_t> cas_{0};
};

}  // namespace mmtk::pmem
