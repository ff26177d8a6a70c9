#pragma once

#include <stdexcept>
#include <string>

namespace mmb {

enum class ErrorKind {
  config,     // bad configuration or usage
  io,         // file could not be opened or written
  parse,      // malformed input file
  data,       // well-formed input that violates a data invariant
  dimension,  // shape mismatch between tensors
  lookup,     // unknown token or factor
  alignment,  // stream/interval alignment failure
  numeric,    // non-finite value or invalid numeric argument
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for an error kind: 1 usage/config, 2 data, 3 numeric.
int exit_code_for(ErrorKind kind);

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace mmb
