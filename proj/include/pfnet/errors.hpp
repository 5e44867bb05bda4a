#pragma once

#include <stdexcept>
#include <string>

namespace pfnet {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can map it to a stable message prefix.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept = 0;
};

#define PFNET_DEFINE_ERROR(Name, Tag)                 \
  class Name : public Error {                         \
   public:                                            \
    using Error::Error;                               \
    const char* kind() const noexcept override {      \
      return Tag;                                     \
    }                                                 \
  };

PFNET_DEFINE_ERROR(ShapeError, "shape error")
PFNET_DEFINE_ERROR(DomainError, "domain error")
PFNET_DEFINE_ERROR(ConfigError, "configuration error")
PFNET_DEFINE_ERROR(UsageError, "usage error")
PFNET_DEFINE_ERROR(ParseError, "parse error")
PFNET_DEFINE_ERROR(IoError, "io error")
PFNET_DEFINE_ERROR(NumericError, "numeric error")

#undef PFNET_DEFINE_ERROR

}  // namespace pfnet
