#pragma once

#include <atomic>
#include <cctype>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace medner {

// Error categories map onto process exit codes (see tools/medner.cpp):
// Config -> 2, Data -> 3, Numeric -> 4.
enum class ErrorKind { Config, Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define MEDNER_ERROR(Name, Kind)                                        \
  struct Name : Error {                                                 \
    explicit Name(const std::string& m) : Error(ErrorKind::Kind, m) {} \
  }

MEDNER_ERROR(MalformedAnnotation, Data);
MEDNER_ERROR(SpanOutOfBounds, Data);
MEDNER_ERROR(InsufficientDocuments, Data);
MEDNER_ERROR(EmptyLexicon, Config);
MEDNER_ERROR(ShapeMismatch, Numeric);
MEDNER_ERROR(NonFiniteValue, Numeric);
MEDNER_ERROR(EmptyWindowStream, Data);
MEDNER_ERROR(MalformedHeader, Data);
MEDNER_ERROR(DimensionMismatch, Data);
MEDNER_ERROR(TooFewWords, Data);
MEDNER_ERROR(ZeroVector, Data);
MEDNER_ERROR(TooFewPoints, Data);
MEDNER_ERROR(InsufficientClassWords, Data);
MEDNER_ERROR(ConfigInvalid, Config);
MEDNER_ERROR(NoPositiveInstances, Data);
MEDNER_ERROR(EmptyTerm, Data);
MEDNER_ERROR(DocumentMismatch, Data);
MEDNER_ERROR(EntryMismatch, Data);
MEDNER_ERROR(StageFailure, Data);

#undef MEDNER_ERROR

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\n') {
      std::string_view line = s.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      out.emplace_back(line);
      start = i + 1;
    }
  }
  if (start < s.size()) {
    std::string_view line = s.substr(start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(line);
  }
  return out;
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// FNV-1a; used for content hashes and seed derivation so results do not
// depend on the standard library's std::hash.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Jobs must be
// independent and write only to their own slot; results stay deterministic
// because the index assignment is fixed.
template <class Fn>
void parallel_for(std::size_t n, int threads, const Fn& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), n));
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace medner
