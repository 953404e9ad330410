#pragma once

#include <stdexcept>
#include <string>

namespace rejectkit {

// Stable machine-readable error codes. The CLI maps these onto exit codes
// and emits them verbatim in error JSON, so names must not change.
enum class ErrorCode {
  duplicate_id,
  prob_out_of_range,
  label_not_binary,
  length_mismatch,
  domain,
  mechanism_mismatch,
  shape_mismatch,
  empty_mask,
  empty_pool,
  empty_input,
  empty_table,
  calibration_degenerate,
  parse_error,
  missing_column,
  unknown_source,
  degenerate_split,
  schema_mismatch,
  spec_invalid,
  invalid_config,
  io_error,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace rejectkit
