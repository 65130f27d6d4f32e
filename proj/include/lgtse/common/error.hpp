// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace lgtse {

enum class ErrorKind {
  kLength,      // signal too short / empty
  kShape,       // tensor or length mismatch
  kConfig,      // inconsistent configuration
  kDomain,      // mathematically undefined input (zero reference, bad epoch)
  kValidation,  // data invariant violated
  kMode,        // training mode lacks a required condition
  kCapacity,    // pool too small for the request
  kIo,          // file system / format
  kTraining,    // non-finite gradients, aborted runs
  kUsage,       // bad command-line usage
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

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) raise(kind, what);
}

}  // namespace lgtse
