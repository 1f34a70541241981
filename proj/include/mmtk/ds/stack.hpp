#pragma once

#include "mmtk/ds/container.hpp"

namespace mmtk::ds {

// Treiber stack. Root block: w0 top (detectable-CAS location). Node next
// fields are plain words written before publication.
class CasStack final : public Container {
 public:
  using Container::Container;
  DsKind kind() const override { return DsKind::kStack; }
  MementoTable fields() const override;
  void insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) override;
  std::uint64_t remove(ThreadCtx& ctx, Offset mmt) override;
  std::vector<std::uint64_t> traverse() const override;
  std::vector<Offset> reachable_blocks() const override;

 private:
  Offset top() const { return root_; }
};

}  // namespace mmtk::ds
