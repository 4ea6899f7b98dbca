#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmrecon {

enum class ErrorCode {
  ParseError,
  EmptyMesh,
  DegenerateCloud,
  KTooLarge,
  MissingNormals,
  SensorCoincidesWithPoint,
  EmptyPartial,
  NoConfidentVoxels,
  NoCandidates,
  CompleterFailure,
  Timeout,
  ProtocolError,
  RemoteFailure,
  TooFewPoints,
  EmptyCloud,
  NonPositiveDimension,
  InvalidArgument,
  ConfigError,
  IoError,
  NoMeshes,
  NoScenes,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::MissingNormals: return "MissingNormals";
    case ErrorCode::SensorCoincidesWithPoint: return "SensorCoincidesWithPoint";
    case ErrorCode::EmptyPartial: return "EmptyPartial";
    case ErrorCode::NoConfidentVoxels: return "NoConfidentVoxels";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::CompleterFailure: return "CompleterFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::RemoteFailure: return "RemoteFailure";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NonPositiveDimension: return "NonPositiveDimension";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NoMeshes: return "NoMeshes";
    case ErrorCode::NoScenes: return "NoScenes";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 protected:
  struct Verbatim {};
  Error(ErrorCode code, const std::string& full_message, Verbatim) : std::runtime_error(full_message), code_(code) {}

 private:
  ErrorCode code_;
};

/// Pipeline failure tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "[" + stage + "] " + cause.what(), Verbatim{}), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mmrecon
