#pragma once

#include <stdexcept>
#include <string>

namespace swift {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// model-io
struct IoError : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct MissingTensor : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteWeight : Error { using Error::Error; };
struct BadPlantIndex : Error { using Error::Error; };

// transformer-core
struct CacheOverflow : Error { using Error::Error; };
struct MaskLengthMismatch : Error { using Error::Error; };
struct DanglingAncestor : Error { using Error::Error; };
struct StaleMark : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };

// draft-engine
struct OutOfRange : Error { using Error::Error; };
struct EmptyTree : Error { using Error::Error; };

// verify-engine
struct InvalidDistribution : Error { using Error::Error; };
struct DegenerateResidual : Error { using Error::Error; };

// layer-optimizer
struct RatioTooLarge : Error { using Error::Error; };
struct InsufficientContext : Error { using Error::Error; };

// orchestrator / harness
struct BadRequest : Error { using Error::Error; };
struct DivZero : Error { using Error::Error; };
struct DatasetError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

struct MalformedRecord : Error {
  MalformedRecord(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_no(line) {}
  int line_no;
};

}  // namespace swift
