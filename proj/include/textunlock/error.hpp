#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace textunlock {

/// Failure categories. The CLI maps these onto exit codes, so keep the list
/// stable and add new kinds at the end.
enum class ErrorKind {
  io,                 // open/read/write failed
  bad_magic,
  bad_version,
  bad_dtype,
  bad_rank,
  truncated,
  non_finite,
  missing_role,
  dim_mismatch,
  bad_template,
  bad_manifest,
  invalid_argument,
  empty_concept_set,
  unknown_concept,
  non_finite_gradient,
  diverged,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::bad_magic: return "bad_magic";
    case ErrorKind::bad_version: return "bad_version";
    case ErrorKind::bad_dtype: return "bad_dtype";
    case ErrorKind::bad_rank: return "bad_rank";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::non_finite: return "non_finite";
    case ErrorKind::missing_role: return "missing_role";
    case ErrorKind::dim_mismatch: return "dim_mismatch";
    case ErrorKind::bad_template: return "bad_template";
    case ErrorKind::bad_manifest: return "bad_manifest";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::empty_concept_set: return "empty_concept_set";
    case ErrorKind::unknown_concept: return "unknown_concept";
    case ErrorKind::non_finite_gradient: return "non_finite_gradient";
    case ErrorKind::diverged: return "diverged";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace textunlock
