#include "rejectkit/error.hpp"

namespace rejectkit {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::duplicate_id: return "DUPLICATE_ID";
    case ErrorCode::prob_out_of_range: return "PROB_OUT_OF_RANGE";
    case ErrorCode::label_not_binary: return "LABEL_NOT_BINARY";
    case ErrorCode::length_mismatch: return "LENGTH_MISMATCH";
    case ErrorCode::domain: return "DOMAIN";
    case ErrorCode::mechanism_mismatch: return "MECHANISM_MISMATCH";
    case ErrorCode::shape_mismatch: return "SHAPE_MISMATCH";
    case ErrorCode::empty_mask: return "EMPTY_MASK";
    case ErrorCode::empty_pool: return "EMPTY_POOL";
    case ErrorCode::empty_input: return "EMPTY_INPUT";
    case ErrorCode::empty_table: return "EMPTY_TABLE";
    case ErrorCode::calibration_degenerate: return "CALIBRATION_DEGENERATE";
    case ErrorCode::parse_error: return "PARSE_ERROR";
    case ErrorCode::missing_column: return "MISSING_COLUMN";
    case ErrorCode::unknown_source: return "UNKNOWN_SOURCE";
    case ErrorCode::degenerate_split: return "DEGENERATE_SPLIT";
    case ErrorCode::schema_mismatch: return "SCHEMA_MISMATCH";
    case ErrorCode::spec_invalid: return "SPEC_INVALID";
    case ErrorCode::invalid_config: return "INVALID_CONFIG";
    case ErrorCode::io_error: return "IO_ERROR";
  }
  return "UNKNOWN";
}

}  // namespace rejectkit
