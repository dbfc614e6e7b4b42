#include "nucd/errors.hpp"

namespace nucd {

const char* to_string(IoErrorKind kind) {
  switch (kind) {
    case IoErrorKind::kNotFound: return "not-found";
    case IoErrorKind::kUnsupportedFormat: return "unsupported-format";
    case IoErrorKind::kMultiChannel: return "multi-channel";
    case IoErrorKind::kTruncated: return "truncated";
    case IoErrorKind::kWrite: return "write-failed";
    case IoErrorKind::kMalformed: return "malformed";
  }
  return "unknown";
}

}  // namespace nucd
