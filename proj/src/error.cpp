#include "mlmkl/error.hpp"

#include <iostream>

#include "mlmkl/types.hpp"

namespace mlmkl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::UnsupportedDegree: return "UnsupportedDegree";
    case ErrorCode::DegenerateRecursion: return "DegenerateRecursion";
    case ErrorCode::InvalidBasisSize: return "InvalidBasisSize";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DegenerateGram: return "DegenerateGram";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

void default_sink(std::string_view message) {
  std::cerr << "warning: " << message << '\n';
}

WarningSink g_sink = &default_sink;

}  // namespace

void set_warning_sink(WarningSink sink) { g_sink = sink ? sink : &default_sink; }

void warn(std::string_view message) { g_sink(message); }

}  // namespace mlmkl
