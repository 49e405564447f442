#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srlstm {

enum class Errc {
  unknown_magic,
  truncated_payload,
  bad_dimension,
  count_mismatch,
  shape_mismatch,
  label_out_of_range,
  cache_mismatch,
  degenerate_step,
  out_of_range_factor,
  negative_level,
  non_finite_loss,
  class_count_mismatch,
  invalid_argument,
  io_failure,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::unknown_magic: return "UnknownMagic";
    case Errc::truncated_payload: return "TruncatedPayload";
    case Errc::bad_dimension: return "BadDimension";
    case Errc::count_mismatch: return "CountMismatch";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::label_out_of_range: return "LabelOutOfRange";
    case Errc::cache_mismatch: return "CacheMismatch";
    case Errc::degenerate_step: return "DegenerateStep";
    case Errc::out_of_range_factor: return "OutOfRangeFactor";
    case Errc::negative_level: return "NegativeLevel";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::class_count_mismatch: return "ClassCountMismatch";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io_failure: return "IoFailure";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool condition, Errc code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace srlstm
