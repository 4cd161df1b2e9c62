#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace pb {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed input file. Carries the frame index when the failure
// is tied to a specific frame of a sequence.
class LoadError : public Error {
public:
  explicit LoadError(const std::string &what,
                     std::optional<std::size_t> frame = std::nullopt)
      : Error(frame ? what + " (frame " + std::to_string(*frame) + ")" : what),
        frame_(frame) {}
  std::optional<std::size_t> frame() const { return frame_; }

private:
  std::optional<std::size_t> frame_;
};

// Violated shape/consistency invariant (dimension mismatch, non-increasing
// timestamps, ...).
class StructureError : public Error {
public:
  using Error::Error;
};

class RangeError : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

// Failure inside a curation stage; the message is prefixed with the stage name.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string &what,
             std::optional<std::size_t> frame = std::nullopt)
      : Error(stage + ": " + what +
              (frame ? " (frame " + std::to_string(*frame) + ")" : "")),
        stage_(std::move(stage)), frame_(frame) {}
  const std::string &stage() const { return stage_; }
  std::optional<std::size_t> frame() const { return frame_; }

private:
  std::string stage_;
  std::optional<std::size_t> frame_;
};

} // namespace pb
