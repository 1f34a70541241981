#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mmtk/context.hpp"
#include "mmtk/insdel.hpp"
#include "mmtk/memento.hpp"

namespace mmtk::ds {

inline constexpr std::uint64_t kEmpty = ~0ull;

enum class DsKind { kMsqCas, kMsqIndel, kMsqVol, kStack };

std::string_view ds_name(DsKind k);
bool parse_ds(std::string_view s, DsKind& out);

class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Node layout shared by every structure: w0 payload, w1 next, w2 repl.
namespace node {
inline constexpr Offset kValue = 0;
inline constexpr Offset kNext = 8;
inline constexpr Offset kRepl = insdel::kReplField;
}  // namespace node

// A queue or stack whose operations take a composite memento body. One
// body serves a whole root operation: it holds the sub-mementos of both the
// insert-side and the remove-side operation.
class Container : public insdel::Traversable {
 public:
  explicit Container(Env& env, Offset root) : env_(&env), root_(root) {}
  ~Container() override = default;

  virtual DsKind kind() const = 0;
  virtual MementoTable fields() const = 0;
  std::size_t memento_bytes() const { return memento_table_bytes(fields()); }

  virtual void insert(ThreadCtx& ctx, Offset mmt, std::uint64_t value) = 0;
  // Returns kEmpty when there was nothing to remove.
  virtual std::uint64_t remove(ThreadCtx& ctx, Offset mmt) = 0;

  // Quiesced only.
  virtual std::vector<std::uint64_t> traverse() const = 0;
  virtual std::vector<Offset> reachable_blocks() const = 0;
  bool contains(Offset block) const override;
  // Block offsets held in the latest slot of any checkpoint in `mmt`.
  std::vector<Offset> checkpointed_handles(Offset mmt) const;

  // Volatile state rebuilt at boot (the DRAM tail of msq-vol).
  virtual void on_boot() {}

  Offset root() const { return root_; }
  Env& env() const { return *env_; }

 protected:
  Offset new_node(ThreadCtx& ctx, std::uint64_t value) const;
  // Walk a singly linked chain starting at `first`, bounded by the heap size.
  std::vector<Offset> chain(Offset first) const;

  Env* env_;
  Offset root_;
};

// Allocate a fresh root (and sentinel) in the pool.
std::unique_ptr<Container> create_container(DsKind kind, Env& env);
// Attach to an existing root after a reboot.
std::unique_ptr<Container> attach_container(DsKind kind, Env& env, Offset root);
MementoTable memento_fields(DsKind kind);

}  // namespace mmtk::ds
