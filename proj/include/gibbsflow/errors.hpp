#ifndef GIBBSFLOW_ERRORS_HPP
#define GIBBSFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gibbsflow {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value lies outside the documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A site index that does not belong to the box it is used with.
class InvalidSite : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// An exact (enumerating) routine was asked to handle more sites than its cap.
class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

/// The operation is not defined for this kind of input.
class Unsupported : public Error {
 public:
  using Error::Error;
};

}  // namespace gibbsflow

#endif  // GIBBSFLOW_ERRORS_HPP
