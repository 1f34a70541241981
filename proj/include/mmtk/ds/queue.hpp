#pragma once

#include <atomic>

#include "mmtk/ds/container.hpp"

namespace mmtk::ds {

// Queue root block: w0 head, w1 tail (unused by msq-vol).
namespace qroot {
inline constexpr Offset kHead = 0;
inline constexpr Offset kTail = 8;
}  // namespace qroot

class QueueBase : public Container {
 public:
  using Container::Container;
  std::vector<std::uint64_t> traverse() const override;
  std::vector<Offset> reachable_blocks() const override;

 protected:
  Offset head() const { return root_ + qroot::kHead; }
  Offset tail() const { return root_ + qroot::kTail; }
};

// Every CAS on head, tail and next is a detectable CAS.
class CasQueue final : public QueueBase {
 public:
  using QueueBase::QueueBase;
  DsKind kind() const override { return DsKind::kMsqCas; }
  MementoTable fields() const override;
  void insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) override;
  std::uint64_t remove(ThreadCtx& ctx, Offset mmt) override;
};

// Links are inserted and the head is advanced with insert/delete; the tail
// stays a detectable-CAS location.
class IndelQueue final : public QueueBase {
 public:
  using QueueBase::QueueBase;
  DsKind kind() const override { return DsKind::kMsqIndel; }
  MementoTable fields() const override;
  void insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) override;
  std::uint64_t remove(ThreadCtx& ctx, Offset mmt) override;
};

// Like IndelQueue, but the tail lives in DRAM. Invariants: the tail is
// reachable from the head, and every link from head to tail is persisted.
class VolQueue final : public QueueBase {
 public:
  using QueueBase::QueueBase;
  DsKind kind() const override { return DsKind::kMsqVol; }
  MementoTable fields() const override;
  void insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) override;
  std::uint64_t remove(ThreadCtx& ctx, Offset mmt) override;
  std::vector<Offset> reachable_blocks() const override;
  void on_boot() override;

  Offset volatile_tail() const { return vtail_.load(); }
  // Both invariants, checked against the pool's persisted snapshot.
  bool check_invariants(std::string* why = nullptr) const;

 private:
  std::atomic<Offset> vtail_{0};
};

}  // namespace mmtk::ds
