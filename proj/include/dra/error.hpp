#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dra {

enum class Errc {
  NotPositiveDefinite,
  NonFinite,
  DimensionMismatch,
  DegenerateData,
  TooFewSamples,
  SingleClass,
  NotEnoughSamples,
  ClassMismatch,
  BadDimension,
  ParseError,
  InconsistentDimension,
  ConfigError,
  IoError,
};

inline std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NotEnoughSamples: return "NotEnoughSamples";
    case Errc::ClassMismatch: return "ClassMismatch";
    case Errc::BadDimension: return "BadDimension";
    case Errc::ParseError: return "ParseError";
    case Errc::InconsistentDimension: return "InconsistentDimension";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  // Message without the error-kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace dra
