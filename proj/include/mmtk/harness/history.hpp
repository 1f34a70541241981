#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace mmtk::harness {

enum class RecKind : std::uint8_t { kInv, kRes, kEvt };

enum class RecOp : std::uint8_t {
  kEnq,
  kDeq,
  kPush,
  kPop,
  kPrefill,
  kBoot,
  kCrash,
  kThreadCrash,
  kRevive,
  kRetire,
  kAlloc,
  kFree,
  kHelp,
};

struct Record {
  std::uint32_t boot = 0;
  std::uint64_t seq = 0;
  std::int32_t tid = -1;
  RecKind kind = RecKind::kEvt;
  RecOp op = RecOp::kBoot;
  std::uint64_t index = 0;   // root-operation index (inv/res)
  std::uint64_t arg = 0;     // enqueued value, or event payload
  std::uint64_t result = 0;  // dequeued value / kEmpty
  std::uint64_t ts = 0;

  bool is_insert() const { return op == RecOp::kEnq || op == RecOp::kPush; }
  bool is_remove() const { return op == RecOp::kDeq || op == RecOp::kPop; }
};

// Append-only log of invocations, responses and ground-truth events.
// Lines: boot,seq,tid,kind,op,args,result,ts
class HistoryLog {
 public:
  HistoryLog() = default;
  explicit HistoryLog(const std::filesystem::path& sink);
  HistoryLog(HistoryLog&& other) noexcept;
  HistoryLog& operator=(HistoryLog&& other) noexcept;

  void set_boot(std::uint32_t boot);
  std::uint32_t boot() const;
  void append(Record r);  // assigns boot and seq
  void event(RecOp op, std::int32_t tid, std::uint64_t arg, std::uint64_t ts = 0);

  std::vector<Record> records() const;
  std::size_t size() const;
  std::string text() const;
  static std::string format(const Record& r);
  static bool parse(const std::string& line, Record& out);
  static HistoryLog from_text(const std::string& text);

 private:
  mutable std::mutex mu_;
  std::vector<Record> records_;
  std::uint32_t boot_ = 0;
  std::uint64_t next_seq_ = 0;
  std::unique_ptr<std::ofstream> sink_;
};

const char* rec_op_name(RecOp op);

}  // namespace mmtk::harness
