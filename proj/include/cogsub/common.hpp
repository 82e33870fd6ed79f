#pragma once

// Shared vocabulary for the whole library: matrix alias, class labels,
// the error type, seed derivation and a bounded parallel loop.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cogsub {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Label : std::uint8_t { CN = 0, MCI = 1 };

inline constexpr std::string_view to_string(Label l) noexcept {
  return l == Label::CN ? "CN" : "MCI";
}

enum class ErrorCode {
  kParse,
  kSchemaMismatch,
  kLabel,
  kConfig,
  kDegenerateLabels,
  kEmptyFeatures,
  kShape,
  kStratification,
  kParameter,
  kNumericalFailure,
  kInvalidMarker,
  kInternalConsistency,
  kInsufficientSamples,
  kArgument,
  kIo,
};

inline constexpr std::string_view to_string(ErrorCode c) noexcept {
  switch (c) {
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kSchemaMismatch: return "schema_mismatch";
    case ErrorCode::kLabel: return "label_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kDegenerateLabels: return "degenerate_labels";
    case ErrorCode::kEmptyFeatures: return "empty_features";
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kStratification: return "stratification_error";
    case ErrorCode::kParameter: return "parameter_error";
    case ErrorCode::kNumericalFailure: return "numerical_failure";
    case ErrorCode::kInvalidMarker: return "invalid_marker";
    case ErrorCode::kInternalConsistency: return "internal_consistency";
    case ErrorCode::kInsufficientSamples: return "insufficient_samples";
    case ErrorCode::kArgument: return "argument_error";
    case ErrorCode::kIo: return "io_error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// splitmix64 finalizer; used to derive independent stream seeds from a root seed.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

template <typename... Streams>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, Streams... rest) noexcept {
  return derive_seed(derive_seed(seed, stream), static_cast<std::uint64_t>(rest)...);
}

inline constexpr std::uint64_t stream_id(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

// 0 means "use hardware concurrency".
inline void set_max_threads(unsigned n) noexcept { detail::thread_cap() = n; }

inline unsigned max_threads() noexcept {
  unsigned cap = detail::thread_cap();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : std::min(cap, hw);
}

// Runs body(i) for i in [0, n). Callers write results into per-index slots,
// so the outcome never depends on the schedule. The first exception thrown
// by any worker is rethrown on the calling thread. Nested calls run serially.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned workers = detail::inside_parallel_region()
                               ? 1u
                               : static_cast<unsigned>(std::min<std::size_t>(max_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    detail::inside_parallel_region() = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  detail::inside_parallel_region() = false;
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cogsub
