#ifndef RR2QC_ERROR_HPP
#define RR2QC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace rr2qc {

// File could not be read or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File content does not match the expected schema.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structural invariant broken (cycles, multiple roots, duplicate ids).
struct StructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Id does not resolve to a known entity.
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the operation's domain.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// External service (LLM endpoint) failed after retries.
struct ServiceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rr2qc

#endif  // RR2QC_ERROR_HPP
