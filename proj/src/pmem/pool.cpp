#include "mmtk/pmem/pool.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

namespace mmtk::pmem {

namespace {

struct alignas(64) LineLock {
  std::atomic<bool> held{false};
  void lock() {
    int spins = 0;
    while (held.exchange(true, std::memory_order_acquire)) {
      if (++spins > 8) std::this_thread::yield();
    }
  }
  void unlock() { held.store(false, std::memory_order_release); }
};

constexpr std::size_t kStripes = 1024;
LineLock g_line_locks[kStripes];

LineLock& lock_for(std::uint64_t uid, std::size_t line) {
  return g_line_locks[(line + uid * 7919) % kStripes];
}

std::atomic<std::uint64_t> g_next_uid{1};

struct PendingSet {
  std::uint64_t uid = 0;
  std::vector<std::size_t> lines;
};

thread_local std::vector<PendingSet> t_pending;

PendingSet& pending_for(std::uint64_t uid) {
  for (auto& p : t_pending) {
    if (p.uid == uid) return p;
  }
  // Reuse a slot left behind by a pool that no longer has pending lines.
  for (auto& p : t_pending) {
    if (p.lines.empty()) {
      p.uid = uid;
      return p;
    }
  }
  t_pending.push_back({uid, {}});
  return t_pending.back();
}

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::uint64_t round_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

}  // namespace

struct PmemPool::Backing {
  int fd = -1;
  void* map = nullptr;
  std::size_t size = 0;
  std::vector<std::uint64_t> heap;

  ~Backing() {
    if (map != nullptr) {
      msync(map, size, MS_SYNC);
      munmap(map, size);
    }
    if (fd >= 0) close(fd);
  }
};

PmemPool::PmemPool() : uid_(g_next_uid.fetch_add(1)) {}

PmemPool::~PmemPool() {
  for (auto& p : t_pending) {
    if (p.uid == uid_) p.lines.clear();
  }
}

void PmemPool::init_from_snapshot(bool zero_fill) {
  std::size_t n = layout_.capacity / 8;
  lines_ = layout_.capacity / kLineSize;
  words_ = std::make_unique<std::atomic<std::uint64_t>[]>(n);
  dirty_ = std::make_unique<std::atomic<std::uint8_t>[]>(lines_);
  for (std::size_t i = 0; i < n; ++i) {
    words_[i].store(zero_fill ? 0 : snapshot_[i], std::memory_order_relaxed);
  }
  for (std::size_t i = 0; i < lines_; ++i) dirty_[i].store(0, std::memory_order_relaxed);
}

void PmemPool::format(std::uint32_t max_threads) {
  if (max_threads == 0 || max_threads > 511) throw UsageError("max_threads out of range");
  Layout l;
  l.capacity = layout_.capacity;
  l.max_threads = max_threads;
  l.clearing_offset = kHeaderSize;
  l.help_offset = l.clearing_offset + static_cast<std::uint64_t>(max_threads) * kLineSize;
  std::uint64_t meta_end = round_up(l.help_offset + 2ull * max_threads * 8, kLineSize);
  if (meta_end >= l.capacity) throw ConfigError("capacity too small for thread count");
  std::uint64_t remaining = l.capacity - meta_end;
  std::uint64_t slots = remaining / kLineSize;
  auto footprint = [](std::uint64_t s) {
    return 2 * round_up(round_up(s, 64) / 64 * 8, kLineSize) + s * kLineSize;
  };
  while (slots > 0 && footprint(slots) > remaining) --slots;
  if (slots == 0) throw ConfigError("capacity too small for a heap");
  std::uint64_t bitmap_bytes = round_up(round_up(slots, 64) / 64 * 8, kLineSize);
  l.bitmap_offset = meta_end;
  l.cont_bitmap_offset = l.bitmap_offset + bitmap_bytes;
  l.heap_offset = l.cont_bitmap_offset + bitmap_bytes;
  l.heap_slots = slots;
  layout_ = l;

  auto put = [this](Offset off, std::uint64_t v) { words_[off / 8].store(v); };
  put(header::kMagic, header::kMagicWord);
  put(header::kCapacity, l.capacity);
  put(header::kRootOffset, 0);
  put(header::kClearingOffset, l.clearing_offset);
  put(header::kHelpOffset, l.help_offset);
  put(header::kMaxThreads, l.max_threads);
  put(header::kLineSize, kLineSize);
  put(header::kBitmapOffset, l.bitmap_offset);
  put(header::kContBitmapOffset, l.cont_bitmap_offset);
  put(header::kHeapOffset, l.heap_offset);
  put(header::kHeapSlots, l.heap_slots);
  // The formatted flag is persisted last so a torn format is detectable.
  for (std::size_t line = 0; line < kHeaderSize / kLineSize; ++line) persist_line(line);
  put(header::kFormatted, 1);
  persist_line(header::kFormatted / kLineSize);
}

void PmemPool::load_layout() {
  auto get = [this](Offset off) { return words_[off / 8].load(); };
  if (get(header::kMagic) != header::kMagicWord) throw CorruptPoolError("bad pool magic or version");
  if (get(header::kFormatted) != 1) throw CorruptPoolError("pool format incomplete");
  if (get(header::kLineSize) != kLineSize) throw CorruptPoolError("unsupported cacheline size");
  Layout l;
  l.capacity = get(header::kCapacity);
  l.max_threads = static_cast<std::uint32_t>(get(header::kMaxThreads));
  l.clearing_offset = get(header::kClearingOffset);
  l.help_offset = get(header::kHelpOffset);
  l.bitmap_offset = get(header::kBitmapOffset);
  l.cont_bitmap_offset = get(header::kContBitmapOffset);
  l.heap_offset = get(header::kHeapOffset);
  l.heap_slots = get(header::kHeapSlots);
  if (l.capacity != layout_.capacity || l.max_threads == 0 || l.max_threads > 511 ||
      l.heap_offset + l.heap_slots * kLineSize > l.capacity || l.clearing_offset < kHeaderSize) {
    throw CorruptPoolError("inconsistent pool header");
  }
  layout_ = l;
}

std::unique_ptr<PmemPool> PmemPool::open(const std::filesystem::path& path, std::uint64_t capacity,
                                         std::uint32_t max_threads) {
  std::unique_ptr<PmemPool> pool(new PmemPool());
  auto backing = std::make_unique<Backing>();
  bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (fresh) {
    if (!is_pow2(capacity) || capacity > kMaxCapacity || capacity < 2 * kHeaderSize) {
      throw ConfigError("capacity must be a power of two in [8 KiB, 2^45]");
    }
  } else {
    std::uint64_t size = std::filesystem::file_size(path);
    if (size < kHeaderSize) throw CorruptPoolError("pool file shorter than its header");
    if (size != capacity) throw ConfigError("capacity mismatch on reopen");
  }
  backing->fd = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
  if (backing->fd < 0) throw std::runtime_error("cannot open pool file: " + std::string(std::strerror(errno)));
  if (fresh && ftruncate(backing->fd, static_cast<off_t>(capacity)) != 0) {
    throw std::runtime_error("cannot size pool file");
  }
  backing->size = capacity;
  backing->map = mmap(nullptr, capacity, PROT_READ | PROT_WRITE, MAP_SHARED, backing->fd, 0);
  if (backing->map == MAP_FAILED) {
    backing->map = nullptr;
    throw std::runtime_error("cannot map pool file");
  }
  pool->snapshot_ = static_cast<std::uint64_t*>(backing->map);
  pool->backing_ = std::move(backing);
  pool->layout_.capacity = capacity;
  pool->init_from_snapshot(false);
  if (fresh) {
    pool->format(max_threads);
  } else {
    if (pool->snapshot_[header::kCapacity / 8] != capacity &&
        pool->snapshot_[header::kMagic / 8] == header::kMagicWord) {
      throw ConfigError("capacity mismatch on reopen");
    }
    pool->load_layout();
  }
  return pool;
}

std::unique_ptr<PmemPool> PmemPool::create_anonymous(std::uint64_t capacity, std::uint32_t max_threads) {
  if (!is_pow2(capacity) || capacity > kMaxCapacity || capacity < 2 * kHeaderSize) {
    throw ConfigError("capacity must be a power of two in [8 KiB, 2^45]");
  }
  std::unique_ptr<PmemPool> pool(new PmemPool());
  pool->backing_ = std::make_unique<Backing>();
  pool->backing_->heap.assign(capacity / 8, 0);
  pool->snapshot_ = pool->backing_->heap.data();
  pool->layout_.capacity = capacity;
  pool->init_from_snapshot(true);
  pool->format(max_threads);
  return pool;
}

std::unique_ptr<PmemPool> PmemPool::from_image(const Image& image) {
  std::uint64_t capacity = image.size() * 8;
  if (!is_pow2(capacity)) throw CorruptPoolError("image size is not a valid capacity");
  std::unique_ptr<PmemPool> pool(new PmemPool());
  pool->backing_ = std::make_unique<Backing>();
  pool->backing_->heap = image;
  pool->snapshot_ = pool->backing_->heap.data();
  pool->layout_.capacity = capacity;
  pool->init_from_snapshot(false);
  pool->load_layout();
  return pool;
}

void PmemPool::write_image(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size() * 8));
  if (!out) throw std::runtime_error("cannot write pool image");
}

void PmemPool::check(Offset off) const {
  if (off % 8 != 0) throw UsageError("misaligned pool access");
  if (off >= layout_.capacity) throw UsageError("out-of-bounds pool access");
}

void PmemPool::enter() const {
  if (hook_ != nullptr) hook_->on_access();
  if (crashing_.load(std::memory_order_acquire)) throw SystemCrash{};
}

void PmemPool::set_root_offset(Offset off) {
  store_word(header::kRootOffset, off);
  flush(header::kRootOffset);
}

std::uint64_t PmemPool::load_word(Offset off) const {
  enter();
  check(off);
  return words_[off / 8].load(std::memory_order_seq_cst);
}

void PmemPool::store_word(Offset off, std::uint64_t v) {
  enter();
  check(off);
  std::size_t line = off / kLineSize;
  LineLock& l = lock_for(uid_, line);
  l.lock();
  words_[off / 8].store(v, std::memory_order_seq_cst);
  dirty_[line].store(1, std::memory_order_relaxed);
  l.unlock();
}

bool PmemPool::cas_word(Offset off, std::uint64_t& expected, std::uint64_t desired) {
  enter();
  check(off);
  cas_.fetch_add(1, std::memory_order_relaxed);
  std::size_t line = off / kLineSize;
  LineLock& l = lock_for(uid_, line);
  l.lock();
  bool ok = words_[off / 8].compare_exchange_strong(expected, desired, std::memory_order_seq_cst);
  if (ok) dirty_[line].store(1, std::memory_order_relaxed);
  l.unlock();
  if (ok) {
    // A successful CAS drains this thread's flush_opt requests.
    PendingSet& p = pending_for(uid_);
    for (std::size_t pl : p.lines) persist_line(pl);
    p.lines.clear();
  }
  return ok;
}

void PmemPool::persist_line(std::size_t line) {
  LineLock& l = lock_for(uid_, line);
  l.lock();
  std::size_t base = line * kWordsPerLine;
  for (std::size_t i = 0; i < kWordsPerLine; ++i) {
    snapshot_[base + i] = words_[base + i].load(std::memory_order_relaxed);
  }
  dirty_[line].store(0, std::memory_order_relaxed);
  l.unlock();
}

void PmemPool::flush(Offset off) {
  enter();
  check(off);
  flushes_.fetch_add(1, std::memory_order_relaxed);
  persist_line(off / kLineSize);
}

void PmemPool::flush_opt(Offset off) {
  enter();
  check(off);
  flushes_.fetch_add(1, std::memory_order_relaxed);
  PendingSet& p = pending_for(uid_);
  std::size_t line = off / kLineSize;
  if (std::find(p.lines.begin(), p.lines.end(), line) == p.lines.end()) p.lines.push_back(line);
}

void PmemPool::sfence() {
  enter();
  fences_.fetch_add(1, std::memory_order_relaxed);
  PendingSet& p = pending_for(uid_);
  for (std::size_t line : p.lines) persist_line(line);
  p.lines.clear();
}

void PmemPool::discard_pending() { pending_for(uid_).lines.clear(); }

std::uint64_t PmemPool::peek_word(Offset off) const {
  check(off);
  return words_[off / 8].load(std::memory_order_seq_cst);
}

bool PmemPool::line_dirty(Offset off) const {
  check(off);
  return dirty_[off / kLineSize].load() != 0;
}

std::uint64_t PmemPool::persisted_word(Offset off) const {
  check(off);
  LineLock& l = lock_for(uid_, off / kLineSize);
  l.lock();
  std::uint64_t v = snapshot_[off / 8];
  l.unlock();
  return v;
}

std::size_t PmemPool::dirty_line_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < lines_; ++i) n += dirty_[i].load(std::memory_order_relaxed);
  return n;
}

void PmemPool::persist_all() {
  for (std::size_t i = 0; i < lines_; ++i) {
    if (dirty_[i].load(std::memory_order_relaxed) != 0) persist_line(i);
  }
  pending_for(uid_).lines.clear();
}

Image PmemPool::current_image() const {
  Image img(layout_.capacity / 8);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = words_[i].load(std::memory_order_relaxed);
  return img;
}

CrashImageSet PmemPool::crash(const CrashModel& model) const {
  CrashImageSet set;
  set.mode_ = model.mode;
  set.persisted_.assign(snapshot_, snapshot_ + layout_.capacity / 8);
  for (std::size_t line = 0; line < lines_; ++line) {
    if (dirty_[line].load(std::memory_order_relaxed) == 0) continue;
    set.dirty_lines_.push_back(line);
    std::array<std::uint64_t, kWordsPerLine> content{};
    for (std::size_t i = 0; i < kWordsPerLine; ++i) {
      content[i] = words_[line * kWordsPerLine + i].load(std::memory_order_relaxed);
    }
    set.dirty_content_.push_back(content);
  }
  if (model.mode == CrashModel::Mode::kEnumerate && set.dirty_lines_.size() > kMaxEnumerateLines) {
    throw ExplosionError("enumerate window has " + std::to_string(set.dirty_lines_.size()) +
                         " dirty lines (max 12); narrow the crash window");
  }
  if (model.mode == CrashModel::Mode::kPerLineRandom) {
    std::mt19937_64 rng(model.seed);
    for (std::size_t j = 0; j < set.dirty_lines_.size(); ++j) set.random_keep_.push_back((rng() & 1) != 0);
  }
  return set;
}

PoolStats PmemPool::stats() const {
  return {flushes_.load(), fences_.load(), cas_.load()};
}

void PmemPool::reset_stats() {
  flushes_.store(0);
  fences_.store(0);
  cas_.store(0);
}

std::size_t CrashImageSet::size() const {
  if (mode_ == CrashModel::Mode::kEnumerate) return std::size_t{1} << dirty_lines_.size();
  return 1;
}

bool CrashImageSet::keeps(std::size_t index, std::size_t j) const {
  switch (mode_) {
    case CrashModel::Mode::kEnumerate:
      return ((index >> j) & 1) != 0;
    case CrashModel::Mode::kPerLineRandom:
      return random_keep_[j];
    case CrashModel::Mode::kRevertAllDirty:
      break;
  }
  return false;
}

Image CrashImageSet::image(std::size_t index) const {
  if (index >= size()) throw UsageError("crash image index out of range");
  Image img = persisted_;
  for (std::size_t j = 0; j < dirty_lines_.size(); ++j) {
    if (!keeps(index, j)) continue;
    std::size_t base = dirty_lines_[j] * kWordsPerLine;
    std::copy(dirty_content_[j].begin(), dirty_content_[j].end(), img.begin() + static_cast<long>(base));
  }
  return img;
}

}  // namespace mmtk::pmem
