#include "mmb/error.hpp"

namespace mmb {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::data: return "data";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return 1;
    case ErrorKind::numeric:
      return 3;
    default:
      return 2;
  }
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace mmb
