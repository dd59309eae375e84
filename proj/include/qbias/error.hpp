#pragma once

#include <stdexcept>
#include <string>

namespace qbias {

enum class ErrorKind {
  Usage,       // operation called without a required precondition (e.g. no layout)
  Layout,      // inconsistent stream layout or profile length
  Domain,      // numeric argument outside its valid range
  Index,       // index out of range
  Parse,       // malformed input file
  Length,      // declared vs. actual length mismatch
  Io,          // file could not be opened/read/written
  Degenerate,  // statistic undefined for the input (zero variance etc.)
  Shape,       // mismatched matrix shapes
  Exhausted,   // file-backed RNG source ran out of integers
  Diverged,    // non-finite loss during training
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace qbias
