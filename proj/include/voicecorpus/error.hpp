#pragma once

#include <stdexcept>
#include <string>

namespace vc {

// Error categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  Io,          // file missing, unreadable or unwritable
  Format,      // unsupported container/codec, malformed record
  Truncated,   // file ends before its declared payload
  Invalid,     // input violates a documented precondition
  Range,       // value outside a representable or permitted range
  Infeasible,  // constraint system has no solution (e.g. audio too short)
  NotFound,    // unknown campaign, task, utterance id
  Domain,      // answer outside the campaign's answer domain
  Conflict,    // duplicate submission, closed campaign
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

// Process exit code for an error category; 0 and 1 are reserved for success
// and internal failures, 2 for usage errors.
int exit_code(ErrorKind kind) noexcept;

}  // namespace vc
