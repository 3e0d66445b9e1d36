// Error codes and the exception type used across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace stasis {

enum class Errc {
  file_not_found,
  io_failure,
  bad_magic,
  bad_maxval,
  truncated_data,
  bad_dimensions,
  dimension_mismatch,
  parse_error,
  non_finite_value,
  not_orthonormal,
  non_integer_timestamp,
  insufficient_points,
  degenerate_configuration,
  no_consensus,
  behind_camera,
  empty_input,
  bad_parameter,
  unknown_preset,
  degenerate_scene,
  insufficient_frames,
  empty_region,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::file_not_found: return "file not found";
    case Errc::io_failure: return "i/o failure";
    case Errc::bad_magic: return "bad magic";
    case Errc::bad_maxval: return "unsupported maxval";
    case Errc::truncated_data: return "truncated data";
    case Errc::bad_dimensions: return "bad dimensions";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::parse_error: return "parse error";
    case Errc::non_finite_value: return "non-finite value";
    case Errc::not_orthonormal: return "rotation not orthonormal";
    case Errc::non_integer_timestamp: return "non-integer timestamp";
    case Errc::insufficient_points: return "insufficient points";
    case Errc::degenerate_configuration: return "degenerate configuration";
    case Errc::no_consensus: return "no consensus";
    case Errc::behind_camera: return "point behind camera";
    case Errc::empty_input: return "empty input";
    case Errc::bad_parameter: return "bad parameter";
    case Errc::unknown_preset: return "unknown preset";
    case Errc::degenerate_scene: return "degenerate scene";
    case Errc::insufficient_frames: return "insufficient frames";
    case Errc::empty_region: return "empty region";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(to_string(code)), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace stasis
