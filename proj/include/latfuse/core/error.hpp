#pragma once

#include <stdexcept>
#include <string>

namespace latfuse {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or channel-count disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Image size not a multiple of a codec's spatial factor.
class DivisibilityError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

/// Invalid argument value (ranges, counts, configuration).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written, or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An asset referenced by a scene or catalog is missing or unusable.
class AssetError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValueError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace detail
}  // namespace latfuse
