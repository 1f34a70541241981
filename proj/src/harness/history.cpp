#include "mmtk/harness/history.hpp"

#include <array>
#include <charconv>
#include <sstream>

#include "mmtk/ds/container.hpp"

namespace mmtk::harness {

namespace {

constexpr std::array<const char*, 13> kOpNames = {"enq",   "deq",          "push",   "pop",    "prefill",
                                                  "boot",  "crash",        "tcrash", "revive", "retire",
                                                  "alloc", "free",         "help"};
constexpr std::array<const char*, 3> kKindNames = {"inv", "res", "evt"};

bool to_u64(std::string_view s, std::uint64_t& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

}  // namespace

const char* rec_op_name(RecOp op) { return kOpNames[static_cast<std::size_t>(op)]; }

HistoryLog::HistoryLog(const std::filesystem::path& sink)
    : sink_(std::make_unique<std::ofstream>(sink, std::ios::out | std::ios::trunc)) {
  if (!*sink_) throw std::runtime_error("cannot open history sink " + sink.string());
}

HistoryLog::HistoryLog(HistoryLog&& other) noexcept {
  std::lock_guard<std::mutex> g(other.mu_);
  records_ = std::move(other.records_);
  boot_ = other.boot_;
  next_seq_ = other.next_seq_;
  sink_ = std::move(other.sink_);
}

HistoryLog& HistoryLog::operator=(HistoryLog&& other) noexcept {
  if (this != &other) {
    std::scoped_lock g(mu_, other.mu_);
    records_ = std::move(other.records_);
    boot_ = other.boot_;
    next_seq_ = other.next_seq_;
    sink_ = std::move(other.sink_);
  }
  return *this;
}

void HistoryLog::set_boot(std::uint32_t boot) {
  std::lock_guard<std::mutex> g(mu_);
  boot_ = boot;
}

std::uint32_t HistoryLog::boot() const {
  std::lock_guard<std::mutex> g(mu_);
  return boot_;
}

void HistoryLog::append(Record r) {
  std::lock_guard<std::mutex> g(mu_);
  r.boot = boot_;
  r.seq = next_seq_++;
  records_.push_back(r);
  if (sink_) *sink_ << format(r) << '\n';
}

void HistoryLog::event(RecOp op, std::int32_t tid, std::uint64_t arg, std::uint64_t ts) {
  Record r;
  r.tid = tid;
  r.kind = RecKind::kEvt;
  r.op = op;
  r.arg = arg;
  r.ts = ts;
  append(r);
}

std::vector<Record> HistoryLog::records() const {
  std::lock_guard<std::mutex> g(mu_);
  return records_;
}

std::size_t HistoryLog::size() const {
  std::lock_guard<std::mutex> g(mu_);
  return records_.size();
}

std::string HistoryLog::format(const Record& r) {
  std::ostringstream os;
  os << r.boot << ',' << r.seq << ',' << r.tid << ',' << kKindNames[static_cast<std::size_t>(r.kind)] << ','
     << rec_op_name(r.op) << ',';
  switch (r.kind) {
    case RecKind::kInv:
    case RecKind::kRes:
      os << r.index;
      if (r.is_insert()) os << ':' << r.arg;
      break;
    case RecKind::kEvt:
      os << r.arg;
      break;
  }
  os << ',';
  if (r.kind == RecKind::kRes) {
    if (r.is_insert()) {
      os << "ok";
    } else if (r.result == ds::kEmpty) {
      os << "empty";
    } else {
      os << r.result;
    }
  } else {
    os << '-';
  }
  os << ',' << r.ts;
  return os.str();
}

bool HistoryLog::parse(const std::string& line, Record& out) {
  std::vector<std::string_view> f;
  std::string_view s(line);
  while (true) {
    auto p = s.find(',');
    f.push_back(s.substr(0, p));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  if (f.size() != 8) return false;
  Record r;
  std::uint64_t u = 0;
  if (!to_u64(f[0], u)) return false;
  r.boot = static_cast<std::uint32_t>(u);
  if (!to_u64(f[1], r.seq)) return false;
  if (f[2] == "-1") {
    r.tid = -1;
  } else {
    if (!to_u64(f[2], u)) return false;
    r.tid = static_cast<std::int32_t>(u);
  }
  bool found = false;
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (f[3] == kKindNames[i]) {
      r.kind = static_cast<RecKind>(i);
      found = true;
    }
  }
  if (!found) return false;
  found = false;
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (f[4] == kOpNames[i]) {
      r.op = static_cast<RecOp>(i);
      found = true;
    }
  }
  if (!found) return false;
  if (r.kind == RecKind::kEvt) {
    if (!to_u64(f[5], r.arg)) return false;
  } else {
    auto colon = f[5].find(':');
    if (!to_u64(f[5].substr(0, colon), r.index)) return false;
    if (colon != std::string_view::npos && !to_u64(f[5].substr(colon + 1), r.arg)) return false;
  }
  if (r.kind == RecKind::kRes && r.is_remove()) {
    if (f[6] == "empty") {
      r.result = ds::kEmpty;
    } else if (!to_u64(f[6], r.result)) {
      return false;
    }
  }
  if (!to_u64(f[7], r.ts)) return false;
  out = r;
  return true;
}

std::string HistoryLog::text() const {
  std::lock_guard<std::mutex> g(mu_);
  std::string out;
  for (const auto& r : records_) {
    out += format(r);
    out += '\n';
  }
  return out;
}

HistoryLog HistoryLog::from_text(const std::string& text) {
  HistoryLog log;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    Record r;
    if (!parse(line, r)) throw std::runtime_error("bad history line: " + line);
    log.records_.push_back(r);
    log.next_seq_ = r.seq + 1;
    log.boot_ = r.boot;
  }
  return log;
}

}  // namespace mmtk::harness
