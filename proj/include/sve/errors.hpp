#pragma once

#include <stdexcept>
#include <string>

namespace sve {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SVE_DEFINE_ERROR(Name)        \
  class Name : public Error {         \
   public:                            \
    using Error::Error;               \
  };

SVE_DEFINE_ERROR(DomainError)
SVE_DEFINE_ERROR(SingularDiagonal)
SVE_DEFINE_ERROR(QuadratureError)
SVE_DEFINE_ERROR(EmptyTruncation)
SVE_DEFINE_ERROR(OrderTooLarge)
SVE_DEFINE_ERROR(IllConditioned)
SVE_DEFINE_ERROR(PreconditionViolated)
SVE_DEFINE_ERROR(UnsupportedDomain)
SVE_DEFINE_ERROR(DomainViolation)
SVE_DEFINE_ERROR(NoConvergence)
SVE_DEFINE_ERROR(PositiveF)
SVE_DEFINE_ERROR(MissingIncrements)
SVE_DEFINE_ERROR(UnsupportedTimeChange)
SVE_DEFINE_ERROR(InsufficientPaths)
SVE_DEFINE_ERROR(ConfigError)

#undef SVE_DEFINE_ERROR

}  // namespace sve
