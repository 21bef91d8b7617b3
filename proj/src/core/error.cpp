#include "sarfsl/core/error.hpp"

namespace sarfsl {

std::string_view error_category(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParameter: return "parameter-error";
    case ErrorKind::kShape: return "shape-error";
    case ErrorKind::kSchema: return "schema-error";
    case ErrorKind::kLoad: return "load-error";
    case ErrorKind::kEmptyPool: return "empty-pool";
    case ErrorKind::kSampling: return "sampling-error";
    case ErrorKind::kConfig: return "config-invalid";
    case ErrorKind::kConfigNotFound: return "config-not-found";
    case ErrorKind::kProtocol: return "protocol-violation";
    case ErrorKind::kMetric: return "metric-error";
    case ErrorKind::kEmptyScores: return "empty-scores";
    case ErrorKind::kRuntime: return "runtime-error";
  }
  return "runtime-error";
}

}  // namespace sarfsl
