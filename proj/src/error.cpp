#include "cgkqi/error.hpp"

namespace cgkqi {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Ordering: return "ordering error";
    case ErrorKind::EmptySession: return "empty session";
    case ErrorKind::Undersampling: return "undersampling error";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::NoResponse: return "no response";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Io: return "I/O error";
  }
  return "error";
}

}  // namespace cgkqi
