#include "domaingcn/error.hpp"

namespace domaingcn {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kContract: return "contract violation";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kStatistics: return "statistics error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kMetrics: return "metrics error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kUsage: return "usage error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
      kind_(kind) {}

void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace domaingcn
