// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/common/error.hpp"

namespace lgtse {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kMode: return "mode error";
    case ErrorKind::kCapacity: return "capacity error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kUsage: return "usage error";
  }
  return "error";
}

void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace lgtse
