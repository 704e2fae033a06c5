#pragma once

#include <stdexcept>
#include <string>

namespace widelimit {

// Base of every error raised by the library. The CLI maps ConfigError to exit
// code 2 and every other Error to exit code 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

#define WIDELIMIT_DEFINE_ERROR(Name, Base) \
    class Name : public Base {             \
    public:                                \
        using Base::Base;                  \
    };

WIDELIMIT_DEFINE_ERROR(InvalidConfig, ConfigError)
WIDELIMIT_DEFINE_ERROR(NonPsdInput, Error)
WIDELIMIT_DEFINE_ERROR(ShapeMismatch, Error)
WIDELIMIT_DEFINE_ERROR(UnsupportedActivation, Error)
WIDELIMIT_DEFINE_ERROR(DimensionTooLarge, Error)
WIDELIMIT_DEFINE_ERROR(SingularBasePoint, Error)
WIDELIMIT_DEFINE_ERROR(SizeMismatch, Error)
WIDELIMIT_DEFINE_ERROR(SingularSystem, Error)
WIDELIMIT_DEFINE_ERROR(VanishingLikelihood, Error)
WIDELIMIT_DEFINE_ERROR(NonpositiveNormalizer, Error)
WIDELIMIT_DEFINE_ERROR(DomainError, Error)
WIDELIMIT_DEFINE_ERROR(NonpositiveValue, Error)
WIDELIMIT_DEFINE_ERROR(InsufficientReplicas, Error)

#undef WIDELIMIT_DEFINE_ERROR

}  // namespace widelimit
