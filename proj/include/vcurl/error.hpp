#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vcurl {

enum class Errc {
  io,
  malformed_record,
  duplicate_id,
  missing_field,
  too_few_frames,
  dimension_mismatch,
  unsupported_format,
  shape_mismatch,
  config_invalid,
  out_of_range,
  empty_target,
  provider_missing_id,
  non_finite_input,
  id_mismatch,
  empty_start_bucket,
  inactive_bucket,
  exhausted,
  corrupt_snapshot,
  group_too_small,
  support_mismatch,
  unnormalized,
  length_mismatch,
};

/// Stable CamelCase name used in machine-readable error lines.
std::string_view to_string(Errc code);

/// Every library failure is reported as an Error carrying a code plus a
/// human-readable detail (offending id, file, line number...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

/// Per-sample failure recorded by batch operations that must not abort.
struct SampleFailure {
  std::string id;
  Errc code;
  std::string detail;
};

}  // namespace vcurl
