#pragma once

#include <stdexcept>
#include <string>

namespace sci3d {

/// Base class for all sci3d domain errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// SE(3) logarithm requested for a rotation whose angle is too close to pi.
struct AngleNearPi : Error {
  explicit AngleNearPi(const std::string& msg) : Error(msg) {}
};

struct PixelOutOfBounds : Error {
  explicit PixelOutOfBounds(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

/// Requested overlapping rate times mask count is not a positive integer.
struct NonIntegerOnesCount : Error {
  explicit NonIntegerOnesCount(const std::string& msg) : Error(msg) {}
};

/// A pixel is never sampled by any mask (per-pixel count k = 0).
struct ZeroMaskPixel : Error {
  explicit ZeroMaskPixel(const std::string& msg) : Error(msg) {}
};

struct ImageTooSmall : Error {
  explicit ImageTooSmall(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace sci3d
