#pragma once

#include <stdexcept>
#include <string>

namespace bubbletrack {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `path()` names the offending JSON location,
/// e.g. `frames[2].detections[0].mask.counts`.
class ParseError : public Error {
public:
  ParseError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)), detail_(what) {}
  const std::string& path() const noexcept { return path_; }
  /// Message without the path prefix.
  const std::string& detail() const noexcept { return detail_; }

private:
  std::string path_;
  std::string detail_;
};

/// Well-formed input that violates a data invariant (bbox vs mask bounds,
/// frame ordering, dimension mismatch).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Mask payload that cannot be decoded (bad RLE sum, degenerate polygon).
class DecodeError : public Error {
public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Caller misused an API (out-of-order frames, mismatched frame sets,
/// unknown track id).
class UsageError : public Error {
public:
  using Error::Error;
};

}  // namespace bubbletrack
