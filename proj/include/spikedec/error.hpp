#ifndef SPIKEDEC_ERROR_HPP
#define SPIKEDEC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace spikedec {

// Every failure raised by the library derives from this, so callers (the CLI in
// particular) can catch one type and print the message.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace spikedec

#endif
