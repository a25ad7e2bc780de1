#pragma once

#include <stdexcept>
#include <string>

namespace vida {

// Base for every input-side failure raised by the library. The command line
// front end maps these to exit status 1; anything else is an internal error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Error carrying a module-specific kind tag.
template <typename Kind>
class KindedError : public Error {
 public:
  KindedError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace vida
