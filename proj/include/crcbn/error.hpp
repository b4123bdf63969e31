#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crcbn {

enum class ErrorKind {
  contract,             // caller broke a precondition
  impossible_evidence,  // p(evidence) == 0
  incomplete_data,      // missing values where complete data is required
  infeasible_start,     // hill-climb start violates the constraints
  oracle_infeasible,    // brute-force state space over the guard
  degenerate_baseline,  // risk-map target has probability 0
  degenerate_labels,    // single-class predictions
  schema_mismatch,
  parse,
  io,
  checksum,
  version,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::impossible_evidence: return "impossible evidence";
    case ErrorKind::incomplete_data: return "incomplete data";
    case ErrorKind::infeasible_start: return "infeasible start";
    case ErrorKind::oracle_infeasible: return "oracle infeasible";
    case ErrorKind::degenerate_baseline: return "degenerate baseline";
    case ErrorKind::degenerate_labels: return "degenerate labels";
    case ErrorKind::schema_mismatch: return "schema mismatch";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::io: return "io error";
    case ErrorKind::checksum: return "checksum failure";
    case ErrorKind::version: return "version mismatch";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::contract, what);
}

}  // namespace crcbn
