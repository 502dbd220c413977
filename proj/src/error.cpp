#include "voicecorpus/error.hpp"

namespace vc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::Invalid: return "invalid";
    case ErrorKind::Range: return "range";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Conflict: return "conflict";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return 3;
    case ErrorKind::Format: return 4;
    case ErrorKind::Truncated: return 5;
    case ErrorKind::Invalid: return 6;
    case ErrorKind::Range: return 7;
    case ErrorKind::Infeasible: return 8;
    case ErrorKind::NotFound: return 9;
    case ErrorKind::Domain: return 10;
    case ErrorKind::Conflict: return 11;
  }
  return 1;
}

}  // namespace vc
