#pragma once

#include <stdexcept>
#include <string>

namespace collagen {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejection sampling could not satisfy the placement constraints, or a
/// placement does not fit the canvas. Generators retry on this error.
class LayoutError : public Error {
public:
    using Error::Error;
};

}  // namespace collagen
