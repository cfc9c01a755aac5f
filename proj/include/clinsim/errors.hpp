// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <stdexcept>
#include <string>

namespace clinsim {

/// Base class for all errors raised by the toolkit.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A file could not be opened, read, or written.
struct IoError : Error {
  using Error::Error;
};

/// An input file violates its documented format. Messages carry file:line where known.
struct ParseError : Error {
  using Error::Error;
};

/// A persisted model file declares an unknown format or version.
struct VersionMismatch : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct SizeMismatch : Error {
  using Error::Error;
};

/// OLS design matrix is not full column rank (collinear base predictions).
struct RankDeficient : Error {
  using Error::Error;
};

/// Pearson correlation requested on a constant vector.
struct DegenerateVariance : Error {
  using Error::Error;
};

struct EmptyCorpus : Error {
  using Error::Error;
};

struct EmptyTrainingSet : Error {
  using Error::Error;
};

struct NonFiniteInput : Error {
  using Error::Error;
};

struct MissingGold : Error {
  using Error::Error;
};

struct EmptyInput : Error {
  using Error::Error;
};

struct EmptyBatch : Error {
  using Error::Error;
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

/// A documented precondition was violated by the caller.
struct InvalidInput : Error {
  using Error::Error;
};

}  // namespace clinsim
