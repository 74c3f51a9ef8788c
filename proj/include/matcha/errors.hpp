#pragma once

#include <stdexcept>
#include <string>

namespace matcha {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameters (schedule, window, counts...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File or format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value was produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

class NotARotation : public Error {
 public:
  using Error::Error;
};

class DegreeTooLarge : public Error {
 public:
  using Error::Error;
};

class EmptyTruncation : public Error {
 public:
  using Error::Error;
};

class TruncationMismatch : public Error {
 public:
  using Error::Error;
};

class CutoffExceedsBlocks : public Error {
 public:
  using Error::Error;
};

class WindowTooLarge : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class AllZeroDeltas : public Error {
 public:
  using Error::Error;
};

class ZeroSignal : public Error {
 public:
  using Error::Error;
};

class UnsupportedMode : public IoError {
 public:
  using IoError::IoError;
};

class CorruptHeader : public IoError {
 public:
  using IoError::IoError;
};

class NonCubic : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace matcha
