#include "novact/core.hpp"

namespace novact {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InconsistentDims: return "InconsistentDims";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::MissingTeacher: return "MissingTeacher";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::IOError: return "IOError";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::InsufficientPatterns: return "InsufficientPatterns";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::BindError: return "BindError";
  }
  return "Unknown";
}

}  // namespace novact

#include "novact/parallel.hpp"

#include <cstdlib>
#include <string>

namespace novact {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NOVACT_THREADS")) {
    try {
      const int value = std::stoi(env);
      if (value > 0) return value;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace novact
