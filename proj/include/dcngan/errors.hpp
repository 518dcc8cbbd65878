#pragma once

#include <stdexcept>
#include <string>

namespace dcngan {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

class MalformedInputError : public Error {
 public:
  using Error::Error;
};

// qp outside the codec range [0, 51].
class InvalidQpError : public Error {
 public:
  using Error::Error;
};

// qp not in the model's one-hot QP set.
class UnsupportedQpError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class InvalidPatchError : public Error {
 public:
  using Error::Error;
};

class InputTooSmallError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcngan
