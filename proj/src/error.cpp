#include "vcurl/error.hpp"

namespace vcurl {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::io: return "Io";
    case Errc::malformed_record: return "MalformedRecord";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::missing_field: return "MissingField";
    case Errc::too_few_frames: return "TooFewFrames";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::empty_target: return "EmptyTarget";
    case Errc::provider_missing_id: return "ProviderMissingId";
    case Errc::non_finite_input: return "NonFiniteInput";
    case Errc::id_mismatch: return "IdMismatch";
    case Errc::empty_start_bucket: return "EmptyStartBucket";
    case Errc::inactive_bucket: return "InactiveBucket";
    case Errc::exhausted: return "Exhausted";
    case Errc::corrupt_snapshot: return "CorruptSnapshot";
    case Errc::group_too_small: return "GroupTooSmall";
    case Errc::support_mismatch: return "SupportMismatch";
    case Errc::unnormalized: return "Unnormalized";
    case Errc::length_mismatch: return "LengthMismatch";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace vcurl
