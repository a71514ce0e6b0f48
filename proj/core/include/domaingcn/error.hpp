#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace domaingcn {

enum class ErrorKind {
  kDimension,
  kContract,
  kFormat,
  kData,
  kConfig,
  kStatistics,
  kTraining,
  kMetrics,
  kIo,
  kUsage,
};

std::string_view ErrorKindName(ErrorKind kind);

// All library failures are reported through this one exception type; the
// kind drives CLI exit codes and message prefixes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& message);

}  // namespace domaingcn
